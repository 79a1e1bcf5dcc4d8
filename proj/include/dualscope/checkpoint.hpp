#pragma once

// Flat binary parameter checkpoint.
//
//   offset  size  field
//   0       8     magic "DSCOPECK"
//   8       4     format version (u32 LE, currently 1)
//   12      4     parameter count (u32 LE)
//   then per parameter:
//           4     name length L (u32 LE)
//           L     name bytes (UTF-8, no terminator)
//           16    dims n, h, w, c (4 x u32 LE)
//           4*N   values, IEEE-754 binary32 LE, N = n*h*w*c
//
// Only parameter values are stored; optimizer state is not.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dualscope/autodiff.hpp"

namespace dualscope {

inline constexpr char kCheckpointMagic[8] = {'D', 'S', 'C', 'O', 'P', 'E', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor4 value;
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

std::vector<std::uint8_t> encode_checkpoint(std::span<const NamedTensor> tensors);
std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> tensors);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

/// Snapshot of parameter values for serialisation.
std::vector<NamedTensor> snapshot(std::span<const Parameter<float>* const> params);

/// Copies checkpoint values into `params`, matching by position. Names and
/// dims must agree; throws FormatError otherwise.
void restore(std::span<const NamedTensor> tensors, std::span<Parameter<float>* const> params);

}  // namespace dualscope
