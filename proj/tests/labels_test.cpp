#include <gtest/gtest.h>

#include <array>
#include <random>
#include <set>

#include "dualscope/error.hpp"
#include "dualscope/labels.hpp"

using namespace dualscope;

namespace {

// Written from the rules, not from the library's table.
GlandClass oracle(LobeClass l, LobeClass r) {
  if (l == r) return static_cast<GlandClass>(code(l));
  if (l == LobeClass::Normal) return static_cast<GlandClass>(code(r));
  if (r == LobeClass::Normal) return static_cast<GlandClass>(code(l));
  std::size_t a = std::min(code(l), code(r));
  std::size_t b = std::max(code(l), code(r));
  std::size_t idx = 6;
  for (std::size_t i = 1; i <= 5; ++i)
    for (std::size_t j = i + 1; j <= 5; ++j, ++idx)
      if (i == a && j == b) return static_cast<GlandClass>(idx);
  return GlandClass::Normal;
}

LobeProbs one_hot(std::size_t i) {
  LobeProbs p{};
  p[i] = 1.0;
  return p;
}

}  // namespace

TEST(Labels, NamesAndParsing) {
  EXPECT_EQ(name(GlandClass::GoiterCancer), "goiter+cancer");
  EXPECT_EQ(parse_lobe_class("Cancer"), LobeClass::Cancer);
  EXPECT_EQ(parse_gland_class("cystic+adenoma"), GlandClass::CysticAdenoma);
  EXPECT_THROW(parse_lobe_class("tumour"), UnknownLabelError);
  EXPECT_THROW(parse_gland_class("cancer+adenoma"), UnknownLabelError);
  EXPECT_THROW(lobe_class_from_code(6), std::out_of_range);
  EXPECT_THROW(gland_class_from_code(16), std::out_of_range);
  for (std::size_t g = 0; g < kGlandClassCount; ++g)
    EXPECT_EQ(code(parse_gland_class(kGlandClassNames[g])), g);
}

TEST(Labels, Dominance) {
  EXPECT_EQ(dominant(LobeClass::Normal, LobeClass::Cancer), LobeClass::Cancer);
  EXPECT_EQ(dominant(LobeClass::Adenoma, LobeClass::Cystic), LobeClass::Adenoma);
  EXPECT_EQ(dominant(LobeClass::Goiter, LobeClass::Goiter), LobeClass::Goiter);
}

TEST(Labels, AllThirtySixPairs) {
  std::set<std::size_t> seen;
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) {
      const auto l = static_cast<LobeClass>(i);
      const auto r = static_cast<LobeClass>(j);
      EXPECT_EQ(fuse_labels(l, r), oracle(l, r)) << i << "," << j;
      EXPECT_EQ(fuse_labels(l, r), fuse_labels(r, l));
      seen.insert(code(fuse_labels(l, r)));
    }
  EXPECT_EQ(seen.size(), 16u);
  EXPECT_EQ(fuse_labels(LobeClass::Normal, LobeClass::Cancer), GlandClass::Cancer);
  EXPECT_EQ(fuse_labels(LobeClass::Cystic, LobeClass::Goiter), GlandClass::CysticGoiter);
}

TEST(Labels, LobePairInvertsFusion) {
  for (std::size_t g = 0; g < kGlandClassCount; ++g) {
    const auto [a, b] = lobe_pair(static_cast<GlandClass>(g));
    EXPECT_EQ(code(fuse_labels(a, b)), g);
    EXPECT_LE(code(a), code(b));
  }
}

TEST(FuseProbs, OneHotReproducesLabels) {
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) {
      const auto q = fuse_probs(one_hot(i), one_hot(j));
      const auto g = code(fuse_labels(static_cast<LobeClass>(i), static_cast<LobeClass>(j)));
      for (std::size_t k = 0; k < 16; ++k) EXPECT_EQ(q[k], k == g ? 1.0 : 0.0);
    }
}

TEST(FuseProbs, UniformInputs) {
  LobeProbs u;
  u.fill(1.0 / 6.0);
  const auto q = fuse_probs(u, u);
  EXPECT_NEAR(q[code(GlandClass::Normal)], 1.0 / 36.0, 1e-15);
  for (std::size_t g = 1; g <= 5; ++g) EXPECT_NEAR(q[g], 3.0 / 36.0, 1e-15);
  for (std::size_t g = 6; g < 16; ++g) EXPECT_NEAR(q[g], 2.0 / 36.0, 1e-15);
}

TEST(FuseProbs, RandomAgainstOuterProductOracle) {
  std::mt19937_64 rng(7);
  std::gamma_distribution<double> gam(0.7, 1.0);
  for (int t = 0; t < 200; ++t) {
    LobeProbs l, r;
    double sl = 0, sr = 0;
    for (std::size_t i = 0; i < 6; ++i) {
      sl += l[i] = gam(rng);
      sr += r[i] = gam(rng);
    }
    for (std::size_t i = 0; i < 6; ++i) {
      l[i] /= sl;
      r[i] /= sr;
    }
    GlandProbs want{};
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j)
        want[code(oracle(static_cast<LobeClass>(i), static_cast<LobeClass>(j)))] += l[i] * r[j];
    const auto q = fuse_probs(l, r);
    const auto swapped = fuse_probs(r, l);
    double s = 0;
    for (std::size_t g = 0; g < 16; ++g) {
      EXPECT_NEAR(q[g], want[g], 1e-12);
      EXPECT_NEAR(swapped[g], q[g], 1e-12);
      EXPECT_GE(q[g], 0.0);
      s += q[g];
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(FuseProbs, RejectsInvalidDistributions) {
  LobeProbs bad{0.5, 0.5, 0.5, 0, 0, 0};
  EXPECT_THROW(fuse_probs(bad, one_hot(0)), std::invalid_argument);
  LobeProbs neg{1.5, -0.5, 0, 0, 0, 0};
  EXPECT_THROW(fuse_probs(one_hot(0), neg), std::invalid_argument);
}

TEST(Argmax, TiesResolveToLowestCode) {
  GlandProbs q{};
  q[3] = 0.4;
  q[9] = 0.4;
  q[0] = 0.2;
  EXPECT_EQ(argmax_gland(q), GlandClass::Goiter);
  LobeProbs p{0.1, 0.3, 0.3, 0.1, 0.1, 0.1};
  EXPECT_EQ(argmax_lobe(p), LobeClass::Thyroiditis);
}
