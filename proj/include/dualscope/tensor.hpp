#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dualscope/error.hpp"

namespace dualscope {

/// Dimensions of a rank-4 tensor in batch, height, width, channel order.
struct Shape4 {
  std::size_t n = 0;
  std::size_t h = 0;
  std::size_t w = 0;
  std::size_t c = 0;

  [[nodiscard]] constexpr std::size_t size() const noexcept { return n * h * w * c; }
  [[nodiscard]] constexpr std::size_t pixel_count() const noexcept { return n * h * w; }
  [[nodiscard]] constexpr std::size_t per_sample() const noexcept { return h * w * c; }

  friend constexpr bool operator==(const Shape4&, const Shape4&) = default;
};

std::string to_string(const Shape4& s);
std::ostream& operator<<(std::ostream& os, const Shape4& s);

/// Dense NHWC tensor with contiguous row-major storage.
///
/// A plain value type: copies are deep, moves are cheap. Element type is
/// float for training and inference; double is instantiated for gradient
/// checking.
template <typename T>
class BasicTensor4 {
 public:
  using value_type = T;

  BasicTensor4() = default;
  explicit BasicTensor4(Shape4 shape, T fill = T{0}) : shape_(shape), data_(shape.size(), fill) {}
  BasicTensor4(Shape4 shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size()) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + to_string(shape_));
    }
  }

  static BasicTensor4 from_values(Shape4 shape, std::initializer_list<T> values) {
    return BasicTensor4(shape, std::vector<T>(values));
  }

  [[nodiscard]] const Shape4& shape() const noexcept { return shape_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  [[nodiscard]] std::span<T> data() noexcept { return data_; }
  [[nodiscard]] std::span<const T> data() const noexcept { return data_; }
  [[nodiscard]] T* ptr() noexcept { return data_.data(); }
  [[nodiscard]] const T* ptr() const noexcept { return data_.data(); }

  [[nodiscard]] std::size_t offset(std::size_t b, std::size_t y, std::size_t x, std::size_t ch) const noexcept {
    return ((b * shape_.h + y) * shape_.w + x) * shape_.c + ch;
  }
  T& at(std::size_t b, std::size_t y, std::size_t x, std::size_t ch) noexcept { return data_[offset(b, y, x, ch)]; }
  const T& at(std::size_t b, std::size_t y, std::size_t x, std::size_t ch) const noexcept {
    return data_[offset(b, y, x, ch)];
  }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  /// Same storage, reinterpreted dimensions. Element count must match.
  [[nodiscard]] BasicTensor4 reshaped(Shape4 shape) const& {
    if (shape.size() != shape_.size()) throw ShapeError("reshape " + to_string(shape_) + " -> " + to_string(shape));
    return BasicTensor4(shape, data_);
  }

  /// Rows [first, first + count) along the batch axis.
  [[nodiscard]] BasicTensor4 batch_slice(std::size_t first, std::size_t count) const;

  template <typename U>
  [[nodiscard]] BasicTensor4<U> cast() const {
    std::vector<U> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return BasicTensor4<U>(shape_, std::move(out));
  }

  [[nodiscard]] bool all_finite() const noexcept;

  friend bool operator==(const BasicTensor4&, const BasicTensor4&) = default;

 private:
  Shape4 shape_{};
  std::vector<T> data_;
};

using Tensor4 = BasicTensor4<float>;
using Tensor4d = BasicTensor4<double>;

/// Stacks single-sample tensors (identical h, w, c) along the batch axis.
template <typename T>
BasicTensor4<T> stack_batch(std::span<const BasicTensor4<T>* const> items);

enum class Padding { Valid, Same };

/// Square-kernel convolution geometry.
struct ConvSpec {
  std::size_t kernel = 1;
  std::size_t stride = 1;
  Padding padding = Padding::Valid;
};

/// Number of valid window placements along one axis: floor((n_in - f) / s) + 1.
std::size_t out_extent(std::size_t n_in, std::size_t f, std::size_t s);

/// Output spatial extent of a convolution under `spec`; validates the spec.
std::size_t conv_out_extent(std::size_t n_in, const ConvSpec& spec);

extern template class BasicTensor4<float>;
extern template class BasicTensor4<double>;

}  // namespace dualscope
