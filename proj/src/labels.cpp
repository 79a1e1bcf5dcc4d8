#include "dualscope/labels.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dualscope/error.hpp"

namespace dualscope {
namespace {

// Code of the combination class for distinct non-normal codes a < b.
constexpr std::size_t combination_code(std::size_t a, std::size_t b) noexcept {
  // Rows of the upper triangle over codes 1..5: (1,*) starts at 6, (2,*) at
  // 10, (3,*) at 13, (4,*) at 15.
  constexpr std::array<std::size_t, 5> row_start = {0, 6, 10, 13, 15};
  return row_start[a] + (b - a - 1);
}

std::string lowercase(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return s;
}

void check_distribution(std::span<const double, kLobeClassCount> p, const char* which) {
  double sum = 0.0;
  for (const double v : p) {
    if (!(v >= 0.0)) throw std::invalid_argument(std::string("fuse_probs: negative entry in ") + which);
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw std::invalid_argument(std::string("fuse_probs: ") + which + " sums to " + std::to_string(sum));
  }
}

}  // namespace

LobeClass lobe_class_from_code(std::size_t c) {
  if (c >= kLobeClassCount) throw std::out_of_range("lobe class code " + std::to_string(c));
  return static_cast<LobeClass>(c);
}

GlandClass gland_class_from_code(std::size_t c) {
  if (c >= kGlandClassCount) throw std::out_of_range("gland class code " + std::to_string(c));
  return static_cast<GlandClass>(c);
}

std::string_view name(LobeClass c) noexcept { return kLobeClassNames[code(c)]; }
std::string_view name(GlandClass c) noexcept { return kGlandClassNames[code(c)]; }

LobeClass parse_lobe_class(std::string_view text) {
  const std::string s = lowercase(text);
  for (std::size_t i = 0; i < kLobeClassCount; ++i) {
    if (kLobeClassNames[i] == s) return static_cast<LobeClass>(i);
  }
  throw UnknownLabelError("unknown lobe class '" + std::string(text) + "'");
}

GlandClass parse_gland_class(std::string_view text) {
  const std::string s = lowercase(text);
  for (std::size_t i = 0; i < kGlandClassCount; ++i) {
    if (kGlandClassNames[i] == s) return static_cast<GlandClass>(i);
  }
  throw UnknownLabelError("unknown gland class '" + std::string(text) + "'");
}

GlandClass fuse_labels(LobeClass left, LobeClass right) noexcept {
  if (left == right) return static_cast<GlandClass>(code(left));
  if (left == LobeClass::Normal) return static_cast<GlandClass>(code(right));
  if (right == LobeClass::Normal) return static_cast<GlandClass>(code(left));
  const std::size_t a = std::min(code(left), code(right));
  const std::size_t b = std::max(code(left), code(right));
  return static_cast<GlandClass>(combination_code(a, b));
}

std::pair<LobeClass, LobeClass> lobe_pair(GlandClass g) noexcept {
  const std::size_t c = code(g);
  if (c < kLobeClassCount) return {static_cast<LobeClass>(c), static_cast<LobeClass>(c)};
  for (std::size_t a = 1; a < kLobeClassCount; ++a) {
    for (std::size_t b = a + 1; b < kLobeClassCount; ++b) {
      if (combination_code(a, b) == c) return {static_cast<LobeClass>(a), static_cast<LobeClass>(b)};
    }
  }
  return {LobeClass::Normal, LobeClass::Normal};  // unreachable for valid codes
}

GlandProbs fuse_probs(std::span<const double, kLobeClassCount> left, std::span<const double, kLobeClassCount> right) {
  check_distribution(left, "left");
  check_distribution(right, "right");
  GlandProbs q{};
  for (std::size_t i = 0; i < kLobeClassCount; ++i) {
    for (std::size_t j = 0; j < kLobeClassCount; ++j) {
      q[code(fuse_labels(static_cast<LobeClass>(i), static_cast<LobeClass>(j)))] += left[i] * right[j];
    }
  }
  return q;
}

GlandClass argmax_gland(std::span<const double, kGlandClassCount> q) noexcept {
  std::size_t best = 0;
  for (std::size_t i = 1; i < q.size(); ++i) {
    if (q[i] > q[best]) best = i;
  }
  return static_cast<GlandClass>(best);
}

LobeClass argmax_lobe(std::span<const double, kLobeClassCount> p) noexcept {
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i] > p[best]) best = i;
  }
  return static_cast<LobeClass>(best);
}

}  // namespace dualscope
