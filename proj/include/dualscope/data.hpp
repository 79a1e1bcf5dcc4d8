#pragma once

// Dataset records, binary PGM I/O, manifest CSV ingestion and resizing.
//
// Images enter the library as pre-windowed 8-bit grayscale lobe crops and
// are stored as [1,H,W,1] tensors with values in [0,1].

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dualscope/labels.hpp"
#include "dualscope/tensor.hpp"

namespace dualscope {

enum class Gender : std::uint8_t { Female = 0, Male = 1, Unknown = 2 };
enum class AgeGroup : std::uint8_t { Below18 = 0, From18To35, From35To55, From55To75, Over75, Unknown };

inline constexpr std::array<std::string_view, 3> kGenderNames = {"female", "male", "unknown"};
inline constexpr std::array<std::string_view, 6> kAgeGroupNames = {"below18", "18-35", "35-55",
                                                                   "55-75",   "75+",   "unknown"};

std::string_view name(Gender g) noexcept;
std::string_view name(AgeGroup a) noexcept;
/// Case-insensitive; an empty string maps to Unknown. Throws UnknownLabelError.
Gender parse_gender(std::string_view text);
AgeGroup parse_age_group(std::string_view text);

struct LobeSample {
  std::string patient_id;
  Tensor4 left_image;   // [1,H,W,1]
  Tensor4 right_image;  // [1,H,W,1]
  LobeClass left_label = LobeClass::Normal;
  LobeClass right_label = LobeClass::Normal;
  GlandClass gland_label = GlandClass::Normal;  // always fuse_labels(left, right)
  Gender gender = Gender::Unknown;
  AgeGroup age_group = AgeGroup::Unknown;

  /// Builds a sample with the gland label derived from the lobe labels.
  static LobeSample make(std::string patient_id, Tensor4 left, Tensor4 right, LobeClass left_label,
                         LobeClass right_label, Gender gender = Gender::Unknown,
                         AgeGroup age_group = AgeGroup::Unknown);
};

/// Exact header line of a manifest file.
inline constexpr std::string_view kManifestHeader = "patient_id,left_path,right_path,left_label,right_label,gender,age_group";

/// Reads a binary (P5) PGM with maxval 255; values are scaled by 1/255.
Tensor4 load_pgm(const std::filesystem::path& path);
Tensor4 decode_pgm(std::string_view bytes);

/// Writes a [1,H,W,1] tensor as P5; values are clamped to [0,1] and rounded
/// to the nearest of 256 levels.
void save_pgm(const std::filesystem::path& path, const Tensor4& image);
std::string encode_pgm(const Tensor4& image);

/// Corner-aligned bilinear resampling of a [1,H,W,C] image to target x target.
Tensor4 resize_bilinear(const Tensor4& image, std::size_t target);

/// Parses a manifest; image paths are resolved relative to the manifest's
/// directory and resized to `image_size`. Gland labels are recomputed.
std::vector<LobeSample> load_manifest(const std::filesystem::path& path, std::size_t image_size);

/// Writes images under `dir/images/` and `dir/manifest.csv`, in order.
void write_dataset(const std::filesystem::path& dir, std::span<const LobeSample> samples);

/// Lobe-class histograms of the left and right images.
struct LobeHistogram {
  std::array<std::size_t, kLobeClassCount> left{};
  std::array<std::size_t, kLobeClassCount> right{};
};
LobeHistogram lobe_histogram(std::span<const LobeSample> samples);
std::array<std::size_t, kGlandClassCount> gland_histogram(std::span<const LobeSample> samples);

}  // namespace dualscope
