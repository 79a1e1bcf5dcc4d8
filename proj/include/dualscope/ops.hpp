#pragma once

// Forward and backward numerical kernels over NHWC tensors.
//
// Weight layouts:
//   conv2d          [f, f, c_in, c_out]
//   depthwise       [f, f, c, 1]
//   pointwise       [1, 1, c_in, c_out]
//   dense           [1, 1, c_in, c_out]   (c_in = h * w * c of the input)
//   bias            any tensor with c_out elements
//
// Dot products accumulate in double; results are stored in the tensor's
// element type.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "dualscope/tensor.hpp"

namespace dualscope::ops {

template <typename T>
using Tensor = BasicTensor4<T>;

// ---------------------------------------------------------------------------
// Forward

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weights, std::span<const T> bias, const ConvSpec& spec);

template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& input, const Tensor<T>& weights, const ConvSpec& spec);

template <typename T>
Tensor<T> pointwise_conv2d(const Tensor<T>& input, const Tensor<T>& weights, std::span<const T> bias);

/// pointwise_conv2d(depthwise_conv2d(input)).
template <typename T>
Tensor<T> separable_conv(const Tensor<T>& input, const Tensor<T>& depthwise_weights,
                         const Tensor<T>& pointwise_weights, std::span<const T> bias, const ConvSpec& spec);

template <typename T>
Tensor<T> relu(const Tensor<T>& t);

/// Valid-padded max pooling. When `argmax` is given it receives, for every
/// output element, the flat input index that produced it (first max wins).
template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& t, std::size_t window, std::size_t stride,
                     std::vector<std::size_t>* argmax = nullptr);

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& t);

template <typename T>
Tensor<T> dense(const Tensor<T>& input, const Tensor<T>& weights, std::span<const T> bias);

/// Softmax over the channel axis, per (n, y, x).
template <typename T>
Tensor<T> softmax(const Tensor<T>& t);

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

/// Symmetric zero padding of (f - 1) / 2 on both spatial axes; f must be odd.
template <typename T>
Tensor<T> pad_same(const Tensor<T>& t, std::size_t f);

/// Reverses the width axis.
template <typename T>
Tensor<T> mirror_horizontal(const Tensor<T>& t);

// ---------------------------------------------------------------------------
// Backward. Each returns gradients w.r.t. the forward operands given the
// upstream gradient `grad_out` (same shape as the forward output).

template <typename T>
struct ConvGrads {
  Tensor<T> input;    // empty when not requested
  Tensor<T> weights;
  std::vector<T> bias;  // empty when the forward had no bias
};

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weights, bool has_bias,
                             const ConvSpec& spec, const Tensor<T>& grad_out, bool need_input_grad = true);

template <typename T>
ConvGrads<T> depthwise_conv2d_backward(const Tensor<T>& input, const Tensor<T>& weights, const ConvSpec& spec,
                                       const Tensor<T>& grad_out, bool need_input_grad = true);

template <typename T>
ConvGrads<T> dense_backward(const Tensor<T>& input, const Tensor<T>& weights, bool has_bias,
                            const Tensor<T>& grad_out, bool need_input_grad = true);

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& grad_out);

template <typename T>
Tensor<T> max_pool2d_backward(const Shape4& input_shape, std::span<const std::size_t> argmax,
                              const Tensor<T>& grad_out);

template <typename T>
Tensor<T> global_avg_pool_backward(const Shape4& input_shape, const Tensor<T>& grad_out);

template <typename T>
Tensor<T> softmax_backward(const Tensor<T>& output, const Tensor<T>& grad_out);

/// Splits a concat gradient back into its two channel ranges.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> concat_channels_backward(std::size_t channels_a, const Tensor<T>& grad_out);

template <typename T>
Tensor<T> pad_same_backward(const Shape4& input_shape, std::size_t f, const Tensor<T>& grad_out);

/// dst += src, element-wise; shapes must match.
template <typename T>
void accumulate(Tensor<T>& dst, const Tensor<T>& src);

}  // namespace dualscope::ops
