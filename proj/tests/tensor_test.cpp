#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "dualscope/ops.hpp"
#include "dualscope/tensor.hpp"
#include "support.hpp"

using namespace dualscope;
using dualscope::testing::max_rel_diff;
using dualscope::testing::naive_conv;
using dualscope::testing::naive_depthwise;
using dualscope::testing::random_tensor;

TEST(Tensor, ShapeAndIndexing) {
  Tensor4 t(Shape4{2, 3, 4, 5});
  EXPECT_EQ(t.size(), 120u);
  t.at(1, 2, 3, 4) = 7.0f;
  EXPECT_EQ(t[t.size() - 1], 7.0f);
  EXPECT_EQ(t.offset(0, 0, 1, 0), 5u);
  EXPECT_THROW(Tensor4(Shape4{1, 2, 2, 1}, std::vector<float>(3)), ShapeError);
  EXPECT_THROW((void)t.reshaped(Shape4{1, 1, 1, 7}), ShapeError);
  const auto s = t.batch_slice(1, 1);
  EXPECT_EQ(s.shape(), (Shape4{1, 3, 4, 5}));
  EXPECT_EQ(s.at(0, 2, 3, 4), 7.0f);
}

TEST(Tensor, OutExtentExamples) {
  EXPECT_EQ(out_extent(224, 5, 1), 220u);
  EXPECT_EQ(out_extent(224, 1, 1), 224u);
  EXPECT_EQ(out_extent(224, 7, 2), 109u);
  EXPECT_THROW(out_extent(3, 5, 1), GeometryError);
  EXPECT_THROW(out_extent(8, 3, 0), GeometryError);
}

TEST(Tensor, OutExtentMatchesPlacementCount) {
  for (std::size_t n = 1; n <= 40; ++n)
    for (std::size_t f = 1; f <= n; ++f)
      for (std::size_t s = 1; s <= 3; ++s) {
        std::size_t placements = 0;
        for (std::size_t start = 0; start + f <= n; start += s) ++placements;
        EXPECT_EQ(out_extent(n, f, s), placements) << n << " " << f << " " << s;
      }
}

TEST(Tensor, SamePaddingRules) {
  EXPECT_EQ(conv_out_extent(17, ConvSpec{7, 1, Padding::Same}), 17u);
  EXPECT_THROW(conv_out_extent(17, ConvSpec{4, 1, Padding::Same}), GeometryError);
  EXPECT_THROW(conv_out_extent(17, ConvSpec{3, 2, Padding::Same}), GeometryError);
}

TEST(Ops, IdentityAndOnesKernels) {
  std::mt19937_64 rng(1);
  const auto x = random_tensor<float>(Shape4{1, 6, 6, 1}, rng);
  Tensor4 id(Shape4{1, 1, 1, 1}, 1.0f);
  EXPECT_EQ(ops::conv2d(x, id, std::span<const float>{}, ConvSpec{}), x);

  Tensor4 c(Shape4{1, 5, 5, 1}, 0.25f);
  Tensor4 ones(Shape4{3, 3, 1, 1}, 1.0f);
  const auto y = ops::conv2d(c, ones, std::span<const float>{}, ConvSpec{3, 1, Padding::Valid});
  ASSERT_EQ(y.shape(), (Shape4{1, 3, 3, 1}));
  for (float v : y.data()) EXPECT_FLOAT_EQ(v, 2.25f);
}

TEST(Ops, ConvAgainstLoopOracle) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> dim(5, 12);
  std::uniform_int_distribution<std::size_t> ch(1, 6);
  const std::size_t ks[] = {1, 3, 5, 7};
  for (int trial = 0; trial < 120; ++trial) {
    const std::size_t f = ks[trial % 4];
    const bool same = trial % 3 == 0;
    const std::size_t stride = same ? 1 : 1 + static_cast<std::size_t>(trial % 2);
    const std::size_t h = std::max(dim(rng), f);
    const std::size_t cin = ch(rng);
    const std::size_t cout = ch(rng);
    const auto x = random_tensor<float>(Shape4{2, h, h + 1, cin}, rng);
    const auto w = random_tensor<float>(Shape4{f, f, cin, cout}, rng);
    const auto bt = random_tensor<float>(Shape4{1, 1, 1, cout}, rng);
    const std::vector<float> bias(bt.data().begin(), bt.data().end());
    const ConvSpec spec{f, stride, same ? Padding::Same : Padding::Valid};
    const auto got = ops::conv2d(x, w, std::span<const float>(bias), spec);
    const auto want = naive_conv(x, w, bias, stride, same ? (f - 1) / 2 : 0);
    ASSERT_EQ(got.shape(), want.shape());
    EXPECT_LE(max_rel_diff(got, want), 1e-5) << "trial " << trial;
  }
}

TEST(Ops, DepthwisePointwiseSeparableAgainstOracle) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t f = trial % 2 ? 3 : 5;
    const bool same = trial % 2 == 0;
    const std::size_t stride = same ? 1 : 1 + static_cast<std::size_t>(trial % 3 == 0);
    const std::size_t c = 1 + static_cast<std::size_t>(trial % 5);
    const std::size_t cout = 1 + static_cast<std::size_t>(trial % 7);
    const auto x = random_tensor<float>(Shape4{1 + static_cast<std::size_t>(trial % 2), 9, 8, c}, rng);
    const auto dw = random_tensor<float>(Shape4{f, f, c, 1}, rng);
    const auto pw = random_tensor<float>(Shape4{1, 1, c, cout}, rng);
    const ConvSpec spec{f, stride, same ? Padding::Same : Padding::Valid};
    const std::size_t pad = same ? (f - 1) / 2 : 0;

    const auto d = ops::depthwise_conv2d(x, dw, spec);
    const auto d_ref = naive_depthwise(x, dw, stride, pad);
    ASSERT_EQ(d.shape(), d_ref.shape());
    EXPECT_LE(max_rel_diff(d, d_ref), 1e-5);

    const auto p = ops::pointwise_conv2d(x, pw, std::span<const float>{});
    EXPECT_LE(max_rel_diff(p, naive_conv(x, pw, {}, 1, 0)), 1e-5);

    const auto s = ops::separable_conv(x, dw, pw, std::span<const float>{}, spec);
    EXPECT_LE(max_rel_diff(s, naive_conv(d_ref, pw, {}, 1, 0)), 1e-5);
  }
}

TEST(Ops, DenseAgainstOracle) {
  std::mt19937_64 rng(4);
  const auto x = random_tensor<float>(Shape4{3, 2, 2, 5}, rng);
  const auto w = random_tensor<float>(Shape4{1, 1, 20, 6}, rng);
  const std::vector<float> b{0.1f, -0.2f, 0.3f, 0.0f, 1.0f, -1.0f};
  const auto y = ops::dense(x, w, std::span<const float>(b));
  ASSERT_EQ(y.shape(), (Shape4{3, 1, 1, 6}));
  for (std::size_t n = 0; n < 3; ++n)
    for (std::size_t o = 0; o < 6; ++o) {
      double s = b[o];
      for (std::size_t i = 0; i < 20; ++i) s += static_cast<double>(x[n * 20 + i]) * w[i * 6 + o];
      EXPECT_NEAR(y.at(n, 0, 0, o), s, 1e-5);
    }
}

TEST(Ops, SoftmaxProperties) {
  Tensor4 zeros(Shape4{1, 1, 1, 6});
  const auto uniform = ops::softmax(zeros);
  for (float v : uniform.data()) EXPECT_NEAR(v, 1.0 / 6.0, 1e-7);

  std::mt19937_64 rng(5);
  const auto x = random_tensor<float>(Shape4{4, 2, 2, 6}, rng, -30.0, 30.0);
  const auto p = ops::softmax(x);
  for (std::size_t r = 0; r < 16; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 6; ++c) {
      EXPECT_GE(p[r * 6 + c], 0.0f);
      s += p[r * 6 + c];
    }
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
  auto shifted = x;
  for (float& v : shifted.data()) v += 100.0f;
  EXPECT_LE(max_rel_diff(ops::softmax(shifted), p), 1e-5);

  Tensor4 big = Tensor4::from_values(Shape4{1, 1, 1, 3}, {1000.0f, 0.0f, -1000.0f});
  const auto q = ops::softmax(big);
  EXPECT_TRUE(q.all_finite());
  EXPECT_FLOAT_EQ(q[0], 1.0f);
}

TEST(Ops, PoolingReluConcatAdd) {
  Tensor4 x = Tensor4::from_values(Shape4{1, 2, 4, 1}, {1, 5, 2, 0, 3, 4, 8, -1});
  std::vector<std::size_t> arg;
  const auto m = ops::max_pool2d(x, 2, 2, &arg);
  ASSERT_EQ(m.shape(), (Shape4{1, 1, 2, 1}));
  EXPECT_EQ(m[0], 5.0f);
  EXPECT_EQ(m[1], 8.0f);
  EXPECT_EQ(arg, (std::vector<std::size_t>{1, 6}));
  EXPECT_THROW(ops::max_pool2d(x, 3, 1), GeometryError);

  const auto g = ops::global_avg_pool(x);
  EXPECT_FLOAT_EQ(g[0], 22.0f / 8.0f);

  const auto r = ops::relu(x);
  EXPECT_EQ(r[7], 0.0f);
  EXPECT_EQ(r[1], 5.0f);

  Tensor4 a(Shape4{1, 2, 2, 2}, 1.0f);
  Tensor4 b(Shape4{1, 2, 2, 3}, 2.0f);
  const auto c = ops::concat_channels(a, b);
  ASSERT_EQ(c.shape(), (Shape4{1, 2, 2, 5}));
  EXPECT_EQ(c.at(0, 1, 1, 1), 1.0f);
  EXPECT_EQ(c.at(0, 1, 1, 2), 2.0f);
  EXPECT_THROW(ops::concat_channels(a, Tensor4(Shape4{1, 3, 2, 1})), ShapeError);
  EXPECT_THROW(ops::add(a, b), ShapeError);
  EXPECT_EQ(ops::add(a, a)[3], 2.0f);
}

TEST(Ops, PadSameAndMirror) {
  Tensor4 x = Tensor4::from_values(Shape4{1, 2, 3, 1}, {1, 2, 3, 4, 5, 6});
  const auto p = ops::pad_same(x, 5);
  ASSERT_EQ(p.shape(), (Shape4{1, 6, 7, 1}));
  EXPECT_EQ(p.at(0, 2, 2, 0), 1.0f);
  EXPECT_EQ(p.at(0, 0, 0, 0), 0.0f);
  EXPECT_FLOAT_EQ(std::accumulate(p.data().begin(), p.data().end(), 0.0f), 21.0f);
  EXPECT_THROW(ops::pad_same(x, 4), GeometryError);

  const auto m = ops::mirror_horizontal(x);
  EXPECT_EQ(m.at(0, 0, 0, 0), 3.0f);
  EXPECT_EQ(m.at(0, 1, 2, 0), 4.0f);
  EXPECT_EQ(ops::mirror_horizontal(m), x);
}

TEST(Ops, ConvRejectsBadGeometry) {
  Tensor4 x(Shape4{1, 4, 4, 2});
  EXPECT_THROW(ops::conv2d(x, Tensor4(Shape4{5, 5, 2, 1}), std::span<const float>{}, ConvSpec{5, 1, Padding::Valid}),
               GeometryError);
  EXPECT_THROW(ops::conv2d(x, Tensor4(Shape4{3, 3, 3, 1}), std::span<const float>{}, ConvSpec{3, 1, Padding::Valid}),
               ShapeError);
}

TEST(Ops, DoubleInstantiationAgreesWithFloat) {
  std::mt19937_64 rng(6);
  const auto x = random_tensor<double>(Shape4{1, 7, 7, 2}, rng);
  const auto w = random_tensor<double>(Shape4{3, 3, 2, 4}, rng);
  const auto yd = ops::conv2d(x, w, std::span<const double>{}, ConvSpec{3, 1, Padding::Same});
  const auto yf = ops::conv2d(x.cast<float>(), w.cast<float>(), std::span<const float>{}, ConvSpec{3, 1, Padding::Same});
  EXPECT_LE(max_rel_diff(yf.cast<double>(), yd), 1e-5);
  EXPECT_LE(max_rel_diff(yd, naive_conv(x, w, {}, 1, 1)), 1e-12);
}
