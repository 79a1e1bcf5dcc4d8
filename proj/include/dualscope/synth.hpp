#pragma once

// Deterministic phantom lobe images standing in for clinical CT crops.
//
// Each lobe class has its own texture family drawn inside an elliptical
// lobe outline: smooth gradient (normal), fine stipple (thyroiditis), a
// few large dark discs (cystic), many mid-size bright blobs (goiter), one
// bright disc (adenoma), an irregular speckled mass (cancer). Gaussian
// pixel noise is added on top and values are clamped to [0,1].

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "dualscope/data.hpp"
#include "dualscope/labels.hpp"
#include "dualscope/tensor.hpp"

namespace dualscope {

struct LobePairCount {
  LobeClass left = LobeClass::Normal;
  LobeClass right = LobeClass::Normal;
  std::size_t count = 0;
};

struct SyntheticSpec {
  /// Samples per gland class. Base class g becomes the pair (g, g); a
  /// combination {a, b} alternates (a, b) and (b, a).
  std::array<std::size_t, kGlandClassCount> per_gland{};
  /// Extra samples with explicit lobe labels, generated after per_gland.
  std::vector<LobePairCount> pairs;
  std::size_t image_size = 64;
  double noise_sigma = 0.05;
  std::uint64_t seed = 0;
  /// Exact number of female records (the rest male), assigned by a seeded
  /// shuffle. Without it every record gets a fair coin flip.
  std::optional<std::size_t> female_count;

  /// Throws std::invalid_argument for a negative/non-finite sigma, a zero
  /// image size or female_count above the total.
  void validate() const;
  [[nodiscard]] std::size_t total() const noexcept;

  /// `per_class` samples of every gland class.
  static SyntheticSpec balanced16(std::size_t per_class, std::size_t image_size = 64, double noise_sigma = 0.05,
                                  std::uint64_t seed = 0);

  /// 977 records whose left and right lobe histograms equal the clinical
  /// per-lobe class counts (left 199/68/299/178/55/178, right
  /// 217/72/308/179/47/154) with 774 female and 203 male patients.
  static SyntheticSpec paper_shaped(std::size_t image_size = 64, double noise_sigma = 0.05, std::uint64_t seed = 0);
};

/// Renders one [1,S,S,1] lobe image of class `c`.
Tensor4 render_lobe(LobeClass c, std::size_t image_size, double noise_sigma, std::mt19937_64& rng);

/// Generates the full dataset. Record i uses an RNG derived from
/// (seed, i), so the output depends only on the spec.
std::vector<LobeSample> synth_generate(const SyntheticSpec& spec);

}  // namespace dualscope
