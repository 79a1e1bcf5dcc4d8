#pragma once

// Lobe and gland diagnosis classes, the severity order between them, and
// the rules that turn a (left, right) pair of lobe diagnoses into one of
// sixteen whole-gland diagnoses.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>

namespace dualscope {

inline constexpr std::size_t kLobeClassCount = 6;
inline constexpr std::size_t kGlandClassCount = 16;

/// Per-lobe diagnosis. The code is also the severity rank.
enum class LobeClass : std::uint8_t { Normal = 0, Thyroiditis = 1, Cystic = 2, Goiter = 3, Adenoma = 4, Cancer = 5 };

/// Whole-gland diagnosis: the six lobe classes, then the ten co-existing
/// pairs of distinct non-normal classes in lexicographic order.
enum class GlandClass : std::uint8_t {
  Normal = 0,
  Thyroiditis = 1,
  Cystic = 2,
  Goiter = 3,
  Adenoma = 4,
  Cancer = 5,
  ThyroiditisCystic = 6,
  ThyroiditisGoiter = 7,
  ThyroiditisAdenoma = 8,
  ThyroiditisCancer = 9,
  CysticGoiter = 10,
  CysticAdenoma = 11,
  CysticCancer = 12,
  GoiterAdenoma = 13,
  GoiterCancer = 14,
  AdenomaCancer = 15,
};

/// Code <-> name tables used by manifests, CSV headers and reports.
inline constexpr std::array<std::string_view, kLobeClassCount> kLobeClassNames = {
    "normal", "thyroiditis", "cystic", "goiter", "adenoma", "cancer"};

inline constexpr std::array<std::string_view, kGlandClassCount> kGlandClassNames = {
    "normal",          "thyroiditis",       "cystic",           "goiter",
    "adenoma",         "cancer",            "thyroiditis+cystic", "thyroiditis+goiter",
    "thyroiditis+adenoma", "thyroiditis+cancer", "cystic+goiter",  "cystic+adenoma",
    "cystic+cancer",   "goiter+adenoma",    "goiter+cancer",    "adenoma+cancer"};

constexpr std::size_t code(LobeClass c) noexcept { return static_cast<std::size_t>(c); }
constexpr std::size_t code(GlandClass c) noexcept { return static_cast<std::size_t>(c); }

/// Throws std::out_of_range for codes outside the table.
LobeClass lobe_class_from_code(std::size_t code);
GlandClass gland_class_from_code(std::size_t code);

std::string_view name(LobeClass c) noexcept;
std::string_view name(GlandClass c) noexcept;

/// Throws UnknownLabelError.
LobeClass parse_lobe_class(std::string_view text);
GlandClass parse_gland_class(std::string_view text);

/// The more severe of two lobe diagnoses.
constexpr LobeClass dominant(LobeClass a, LobeClass b) noexcept { return code(a) >= code(b) ? a : b; }

/// Whole-gland label for a (left, right) pair: identical lobes keep their
/// class, a normal lobe defers to the other, otherwise the unordered pair.
GlandClass fuse_labels(LobeClass left, LobeClass right) noexcept;

/// For combination classes the two distinct lobe classes (lower code
/// first); for base classes the pair (g, g).
std::pair<LobeClass, LobeClass> lobe_pair(GlandClass g) noexcept;

using LobeProbs = std::array<double, kLobeClassCount>;
using GlandProbs = std::array<double, kGlandClassCount>;

/// Outer product of the two lobe distributions, bucketed by fuse_labels:
///   q[g] = sum over (i, j) with fuse_labels(i, j) == g of left[i] * right[j]
/// Throws std::invalid_argument if an input is negative or does not sum to
/// 1 within 1e-6.
GlandProbs fuse_probs(std::span<const double, kLobeClassCount> left, std::span<const double, kLobeClassCount> right);

/// Index of the largest entry; ties resolve to the lowest code.
GlandClass argmax_gland(std::span<const double, kGlandClassCount> q) noexcept;

/// Same rule over the six lobe classes.
LobeClass argmax_lobe(std::span<const double, kLobeClassCount> p) noexcept;

}  // namespace dualscope
