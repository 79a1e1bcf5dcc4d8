#include "dualscope/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dualscope/kernels.hpp"
#include "dualscope/parallel.hpp"

namespace dualscope::ops {
namespace {

using std::size_t;
using std::ptrdiff_t;

// Rows of output pixels handed to one thread must amount to at least this
// many multiply-adds before a second thread is worth starting.
constexpr size_t kMinMacsPerThread = size_t{1} << 20;

size_t rows_per_thread(size_t macs_per_row) {
  return std::max<size_t>(1, kMinMacsPerThread / std::max<size_t>(1, macs_per_row));
}

size_t same_pad(const ConvSpec& spec) { return spec.padding == Padding::Same ? (spec.kernel - 1) / 2 : 0; }

void require(bool cond, const std::string& what) {
  if (!cond) throw ShapeError(what);
}

template <typename T>
const T* bias_ptr(std::span<const T> bias, size_t expected, const char* op) {
  if (bias.empty()) return nullptr;
  require(bias.size() == expected, std::string(op) + ": bias has " + std::to_string(bias.size()) +
                                       " elements, expected " + std::to_string(expected));
  return bias.data();
}

template <typename T>
Tensor<T> from_acc(const Shape4& s, const std::vector<double>& acc) {
  std::vector<T> out(acc.size());
  for (size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<T>(acc[i]);
  return Tensor<T>(s, std::move(out));
}

// Input coordinate for output coordinate `o` and kernel tap `k`, or -1 when
// the tap lands in the zero padding.
inline ptrdiff_t tap(size_t o, size_t k, size_t stride, size_t pad, size_t extent) {
  const ptrdiff_t i = static_cast<ptrdiff_t>(o * stride + k) - static_cast<ptrdiff_t>(pad);
  return (i < 0 || i >= static_cast<ptrdiff_t>(extent)) ? -1 : i;
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weights, std::span<const T> bias, const ConvSpec& spec) {
  const Shape4& is = input.shape();
  const Shape4& ws = weights.shape();
  const size_t f = spec.kernel;
  require(ws.n == f && ws.h == f, "conv2d: weights " + to_string(ws) + " do not match kernel size " +
                                      std::to_string(f));
  require(ws.w == is.c, "conv2d: input has " + std::to_string(is.c) + " channels, weights expect " +
                            std::to_string(ws.w));
  const size_t c_in = is.c;
  const size_t c_out = ws.c;
  const T* b = bias_ptr(bias, c_out, "conv2d");
  const size_t oh = conv_out_extent(is.h, spec);
  const size_t ow = conv_out_extent(is.w, spec);
  const size_t pad = same_pad(spec);

  Tensor<T> out(Shape4{is.n, oh, ow, c_out});
  const T* in = input.ptr();
  const T* w = weights.ptr();
  T* o = out.ptr();

  parallel_for(is.n * oh, rows_per_thread(ow * f * f * c_in * c_out), [&](size_t r0, size_t r1) {
    std::vector<double> acc(c_out);
    for (size_t r = r0; r < r1; ++r) {
      const size_t bi = r / oh;
      const size_t oy = r % oh;
      for (size_t ox = 0; ox < ow; ++ox) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (size_t ky = 0; ky < f; ++ky) {
          const ptrdiff_t iy = tap(oy, ky, spec.stride, pad, is.h);
          if (iy < 0) continue;
          for (size_t kx = 0; kx < f; ++kx) {
            const ptrdiff_t ix = tap(ox, kx, spec.stride, pad, is.w);
            if (ix < 0) continue;
            const T* px = in + input.offset(bi, static_cast<size_t>(iy), static_cast<size_t>(ix), 0);
            const T* wrow = w + (ky * f + kx) * c_in * c_out;
            for (size_t ci = 0; ci < c_in; ++ci) kernels::axpy_acc(acc.data(), px[ci], wrow + ci * c_out, c_out);
          }
        }
        kernels::store(o + out.offset(bi, oy, ox, 0), acc.data(), b, c_out);
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& input, const Tensor<T>& weights, const ConvSpec& spec) {
  const Shape4& is = input.shape();
  const Shape4& ws = weights.shape();
  const size_t f = spec.kernel;
  require(ws.n == f && ws.h == f && ws.c == 1,
          "depthwise_conv2d: weights " + to_string(ws) + " must be [f,f,c,1] with f=" + std::to_string(f));
  require(ws.w == is.c, "depthwise_conv2d: input has " + std::to_string(is.c) + " channels, weights expect " +
                            std::to_string(ws.w));
  const size_t c = is.c;
  const size_t oh = conv_out_extent(is.h, spec);
  const size_t ow = conv_out_extent(is.w, spec);
  const size_t pad = same_pad(spec);

  Tensor<T> out(Shape4{is.n, oh, ow, c});
  const T* in = input.ptr();
  const T* w = weights.ptr();
  T* o = out.ptr();

  parallel_for(is.n * oh, rows_per_thread(ow * f * f * c), [&](size_t r0, size_t r1) {
    std::vector<double> acc(c);
    for (size_t r = r0; r < r1; ++r) {
      const size_t bi = r / oh;
      const size_t oy = r % oh;
      for (size_t ox = 0; ox < ow; ++ox) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (size_t ky = 0; ky < f; ++ky) {
          const ptrdiff_t iy = tap(oy, ky, spec.stride, pad, is.h);
          if (iy < 0) continue;
          for (size_t kx = 0; kx < f; ++kx) {
            const ptrdiff_t ix = tap(ox, kx, spec.stride, pad, is.w);
            if (ix < 0) continue;
            const T* px = in + input.offset(bi, static_cast<size_t>(iy), static_cast<size_t>(ix), 0);
            kernels::mul_acc(acc.data(), px, w + (ky * f + kx) * c, c);
          }
        }
        kernels::store(o + out.offset(bi, oy, ox, 0), acc.data(), static_cast<const T*>(nullptr), c);
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> pointwise_conv2d(const Tensor<T>& input, const Tensor<T>& weights, std::span<const T> bias) {
  require(weights.shape().n == 1 && weights.shape().h == 1,
          "pointwise_conv2d: weights " + to_string(weights.shape()) + " must be [1,1,c_in,c_out]");
  return conv2d(input, weights, bias, ConvSpec{1, 1, Padding::Valid});
}

template <typename T>
Tensor<T> separable_conv(const Tensor<T>& input, const Tensor<T>& depthwise_weights,
                         const Tensor<T>& pointwise_weights, std::span<const T> bias, const ConvSpec& spec) {
  return pointwise_conv2d(depthwise_conv2d(input, depthwise_weights, spec), pointwise_weights, bias);
}

template <typename T>
Tensor<T> relu(const Tensor<T>& t) {
  Tensor<T> out(t.shape());
  const auto src = t.data();
  auto dst = out.data();
  for (size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > T{0} ? src[i] : T{0};
  return out;
}

template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& t, size_t window, size_t stride, std::vector<size_t>* argmax) {
  const Shape4& s = t.shape();
  const size_t oh = out_extent(s.h, window, stride);
  const size_t ow = out_extent(s.w, window, stride);
  Tensor<T> out(Shape4{s.n, oh, ow, s.c});
  if (argmax) argmax->assign(out.size(), 0);
  size_t k = 0;
  for (size_t b = 0; b < s.n; ++b) {
    for (size_t oy = 0; oy < oh; ++oy) {
      for (size_t ox = 0; ox < ow; ++ox) {
        for (size_t ch = 0; ch < s.c; ++ch, ++k) {
          size_t best = t.offset(b, oy * stride, ox * stride, ch);
          for (size_t dy = 0; dy < window; ++dy) {
            for (size_t dx = 0; dx < window; ++dx) {
              const size_t idx = t.offset(b, oy * stride + dy, ox * stride + dx, ch);
              if (t[idx] > t[best]) best = idx;
            }
          }
          out[k] = t[best];
          if (argmax) (*argmax)[k] = best;
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& t) {
  const Shape4& s = t.shape();
  require(s.h * s.w > 0, "global_avg_pool: empty spatial extent");
  Tensor<T> out(Shape4{s.n, 1, 1, s.c});
  std::vector<double> acc(s.c);
  const double inv = 1.0 / static_cast<double>(s.h * s.w);
  for (size_t b = 0; b < s.n; ++b) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (size_t p = 0; p < s.h * s.w; ++p) kernels::add_acc(acc.data(), t.ptr() + (b * s.h * s.w + p) * s.c, s.c);
    for (size_t ch = 0; ch < s.c; ++ch) out[b * s.c + ch] = static_cast<T>(acc[ch] * inv);
  }
  return out;
}

template <typename T>
Tensor<T> dense(const Tensor<T>& input, const Tensor<T>& weights, std::span<const T> bias) {
  const Shape4& is = input.shape();
  const Shape4& ws = weights.shape();
  const size_t c_in = is.per_sample();
  require(ws.n == 1 && ws.h == 1 && ws.w == c_in,
          "dense: input " + to_string(is) + " incompatible with weights " + to_string(ws));
  const size_t c_out = ws.c;
  const T* b = bias_ptr(bias, c_out, "dense");
  Tensor<T> out(Shape4{is.n, 1, 1, c_out});
  std::vector<double> acc(c_out);
  for (size_t bi = 0; bi < is.n; ++bi) {
    std::fill(acc.begin(), acc.end(), 0.0);
    const T* x = input.ptr() + bi * c_in;
    for (size_t i = 0; i < c_in; ++i) kernels::axpy_acc(acc.data(), x[i], weights.ptr() + i * c_out, c_out);
    kernels::store(out.ptr() + bi * c_out, acc.data(), b, c_out);
  }
  return out;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& t) {
  const Shape4& s = t.shape();
  Tensor<T> out(s);
  std::vector<double> e(s.c);
  for (size_t p = 0; p < s.pixel_count(); ++p) {
    const T* x = t.ptr() + p * s.c;
    T* y = out.ptr() + p * s.c;
    const double mx = static_cast<double>(*std::max_element(x, x + s.c));
    double sum = 0.0;
    for (size_t ch = 0; ch < s.c; ++ch) {
      e[ch] = std::exp(static_cast<double>(x[ch]) - mx);
      sum += e[ch];
    }
    for (size_t ch = 0; ch < s.c; ++ch) y[ch] = static_cast<T>(e[ch] / sum);
  }
  return out;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape4& sa = a.shape();
  const Shape4& sb = b.shape();
  require(sa.n == sb.n && sa.h == sb.h && sa.w == sb.w,
          "concat_channels: " + to_string(sa) + " vs " + to_string(sb));
  Tensor<T> out(Shape4{sa.n, sa.h, sa.w, sa.c + sb.c});
  for (size_t p = 0; p < sa.pixel_count(); ++p) {
    T* dst = out.ptr() + p * (sa.c + sb.c);
    std::copy_n(a.ptr() + p * sa.c, sa.c, dst);
    std::copy_n(b.ptr() + p * sb.c, sb.c, dst + sa.c);
  }
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "add: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  Tensor<T> out = a;
  accumulate(out, b);
  return out;
}

template <typename T>
Tensor<T> pad_same(const Tensor<T>& t, size_t f) {
  if (f == 0 || f % 2 == 0) throw GeometryError("pad_same requires an odd kernel size, got " + std::to_string(f));
  const size_t p = (f - 1) / 2;
  const Shape4& s = t.shape();
  Tensor<T> out(Shape4{s.n, s.h + 2 * p, s.w + 2 * p, s.c});
  for (size_t b = 0; b < s.n; ++b) {
    for (size_t y = 0; y < s.h; ++y) {
      std::copy_n(t.ptr() + t.offset(b, y, 0, 0), s.w * s.c, out.ptr() + out.offset(b, y + p, p, 0));
    }
  }
  return out;
}

template <typename T>
Tensor<T> mirror_horizontal(const Tensor<T>& t) {
  const Shape4& s = t.shape();
  Tensor<T> out(s);
  for (size_t b = 0; b < s.n; ++b) {
    for (size_t y = 0; y < s.h; ++y) {
      for (size_t x = 0; x < s.w; ++x) {
        std::copy_n(t.ptr() + t.offset(b, y, x, 0), s.c, out.ptr() + out.offset(b, y, s.w - 1 - x, 0));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Backward

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weights, bool has_bias,
                             const ConvSpec& spec, const Tensor<T>& grad_out, bool need_input_grad) {
  const Shape4& is = input.shape();
  const Shape4& ws = weights.shape();
  const size_t f = spec.kernel;
  const size_t c_in = is.c;
  const size_t c_out = ws.c;
  const size_t oh = conv_out_extent(is.h, spec);
  const size_t ow = conv_out_extent(is.w, spec);
  require(grad_out.shape() == (Shape4{is.n, oh, ow, c_out}),
          "conv2d_backward: grad " + to_string(grad_out.shape()) + " does not match forward output");
  const size_t pad = same_pad(spec);

  std::vector<double> gin(need_input_grad ? input.size() : 0);
  std::vector<double> gw(weights.size());
  std::vector<double> gb(has_bias ? c_out : 0);

  for (size_t bi = 0; bi < is.n; ++bi) {
    for (size_t oy = 0; oy < oh; ++oy) {
      for (size_t ox = 0; ox < ow; ++ox) {
        const T* g = grad_out.ptr() + grad_out.offset(bi, oy, ox, 0);
        if (has_bias) kernels::add_acc(gb.data(), g, c_out);
        for (size_t ky = 0; ky < f; ++ky) {
          const ptrdiff_t iy = tap(oy, ky, spec.stride, pad, is.h);
          if (iy < 0) continue;
          for (size_t kx = 0; kx < f; ++kx) {
            const ptrdiff_t ix = tap(ox, kx, spec.stride, pad, is.w);
            if (ix < 0) continue;
            const size_t in_off = input.offset(bi, static_cast<size_t>(iy), static_cast<size_t>(ix), 0);
            const T* px = input.ptr() + in_off;
            const size_t wbase = (ky * f + kx) * c_in * c_out;
            for (size_t ci = 0; ci < c_in; ++ci) {
              kernels::axpy_acc(gw.data() + wbase + ci * c_out, px[ci], g, c_out);
              if (need_input_grad) gin[in_off + ci] += kernels::dot(weights.ptr() + wbase + ci * c_out, g, c_out);
            }
          }
        }
      }
    }
  }

  ConvGrads<T> out;
  if (need_input_grad) out.input = from_acc<T>(is, gin);
  out.weights = from_acc<T>(ws, gw);
  out.bias.assign(gb.begin(), gb.end());
  return out;
}

template <typename T>
ConvGrads<T> depthwise_conv2d_backward(const Tensor<T>& input, const Tensor<T>& weights, const ConvSpec& spec,
                                       const Tensor<T>& grad_out, bool need_input_grad) {
  const Shape4& is = input.shape();
  const size_t f = spec.kernel;
  const size_t c = is.c;
  const size_t oh = conv_out_extent(is.h, spec);
  const size_t ow = conv_out_extent(is.w, spec);
  require(grad_out.shape() == (Shape4{is.n, oh, ow, c}),
          "depthwise_conv2d_backward: grad " + to_string(grad_out.shape()) + " does not match forward output");
  const size_t pad = same_pad(spec);

  std::vector<double> gin(need_input_grad ? input.size() : 0);
  std::vector<double> gw(weights.size());

  for (size_t bi = 0; bi < is.n; ++bi) {
    for (size_t oy = 0; oy < oh; ++oy) {
      for (size_t ox = 0; ox < ow; ++ox) {
        const T* g = grad_out.ptr() + grad_out.offset(bi, oy, ox, 0);
        for (size_t ky = 0; ky < f; ++ky) {
          const ptrdiff_t iy = tap(oy, ky, spec.stride, pad, is.h);
          if (iy < 0) continue;
          for (size_t kx = 0; kx < f; ++kx) {
            const ptrdiff_t ix = tap(ox, kx, spec.stride, pad, is.w);
            if (ix < 0) continue;
            const size_t in_off = input.offset(bi, static_cast<size_t>(iy), static_cast<size_t>(ix), 0);
            const T* wtap = weights.ptr() + (ky * f + kx) * c;
            kernels::mul_acc(gw.data() + (ky * f + kx) * c, input.ptr() + in_off, g, c);
            if (need_input_grad) kernels::mul_acc(gin.data() + in_off, g, wtap, c);
          }
        }
      }
    }
  }

  ConvGrads<T> out;
  if (need_input_grad) out.input = from_acc<T>(is, gin);
  out.weights = from_acc<T>(weights.shape(), gw);
  return out;
}

template <typename T>
ConvGrads<T> dense_backward(const Tensor<T>& input, const Tensor<T>& weights, bool has_bias,
                            const Tensor<T>& grad_out, bool need_input_grad) {
  const Shape4& is = input.shape();
  const size_t c_in = is.per_sample();
  const size_t c_out = weights.shape().c;
  require(grad_out.shape() == (Shape4{is.n, 1, 1, c_out}),
          "dense_backward: grad " + to_string(grad_out.shape()) + " does not match forward output");
  std::vector<double> gw(weights.size());
  std::vector<double> gb(has_bias ? c_out : 0);
  ConvGrads<T> out;
  if (need_input_grad) out.input = Tensor<T>(is);
  for (size_t bi = 0; bi < is.n; ++bi) {
    const T* g = grad_out.ptr() + bi * c_out;
    const T* x = input.ptr() + bi * c_in;
    if (has_bias) kernels::add_acc(gb.data(), g, c_out);
    for (size_t i = 0; i < c_in; ++i) {
      kernels::axpy_acc(gw.data() + i * c_out, x[i], g, c_out);
      if (need_input_grad) out.input[bi * c_in + i] = static_cast<T>(kernels::dot(weights.ptr() + i * c_out, g, c_out));
    }
  }
  out.weights = from_acc<T>(weights.shape(), gw);
  out.bias.assign(gb.begin(), gb.end());
  return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& grad_out) {
  require(input.shape() == grad_out.shape(), "relu_backward: shape mismatch");
  Tensor<T> out(input.shape());
  for (size_t i = 0; i < input.size(); ++i) out[i] = input[i] > T{0} ? grad_out[i] : T{0};
  return out;
}

template <typename T>
Tensor<T> max_pool2d_backward(const Shape4& input_shape, std::span<const size_t> argmax, const Tensor<T>& grad_out) {
  require(argmax.size() == grad_out.size(), "max_pool2d_backward: argmax/grad size mismatch");
  Tensor<T> out(input_shape);
  for (size_t k = 0; k < argmax.size(); ++k) out[argmax[k]] += grad_out[k];
  return out;
}

template <typename T>
Tensor<T> global_avg_pool_backward(const Shape4& input_shape, const Tensor<T>& grad_out) {
  require(grad_out.shape() == (Shape4{input_shape.n, 1, 1, input_shape.c}), "global_avg_pool_backward: shape");
  Tensor<T> out(input_shape);
  const size_t hw = input_shape.h * input_shape.w;
  const double inv = 1.0 / static_cast<double>(hw);
  for (size_t b = 0; b < input_shape.n; ++b) {
    for (size_t p = 0; p < hw; ++p) {
      for (size_t ch = 0; ch < input_shape.c; ++ch) {
        out[(b * hw + p) * input_shape.c + ch] = static_cast<T>(static_cast<double>(grad_out[b * input_shape.c + ch]) * inv);
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> softmax_backward(const Tensor<T>& output, const Tensor<T>& grad_out) {
  require(output.shape() == grad_out.shape(), "softmax_backward: shape mismatch");
  const Shape4& s = output.shape();
  Tensor<T> out(s);
  for (size_t p = 0; p < s.pixel_count(); ++p) {
    const T* y = output.ptr() + p * s.c;
    const T* g = grad_out.ptr() + p * s.c;
    double dotp = 0.0;
    for (size_t ch = 0; ch < s.c; ++ch) dotp += static_cast<double>(y[ch]) * static_cast<double>(g[ch]);
    for (size_t ch = 0; ch < s.c; ++ch) {
      out[p * s.c + ch] = static_cast<T>(static_cast<double>(y[ch]) * (static_cast<double>(g[ch]) - dotp));
    }
  }
  return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> concat_channels_backward(size_t channels_a, const Tensor<T>& grad_out) {
  const Shape4& s = grad_out.shape();
  require(channels_a <= s.c, "concat_channels_backward: split beyond channel count");
  const size_t cb = s.c - channels_a;
  Tensor<T> ga(Shape4{s.n, s.h, s.w, channels_a});
  Tensor<T> gb(Shape4{s.n, s.h, s.w, cb});
  for (size_t p = 0; p < s.pixel_count(); ++p) {
    std::copy_n(grad_out.ptr() + p * s.c, channels_a, ga.ptr() + p * channels_a);
    std::copy_n(grad_out.ptr() + p * s.c + channels_a, cb, gb.ptr() + p * cb);
  }
  return {std::move(ga), std::move(gb)};
}

template <typename T>
Tensor<T> pad_same_backward(const Shape4& input_shape, size_t f, const Tensor<T>& grad_out) {
  const size_t p = (f - 1) / 2;
  require(grad_out.shape() == (Shape4{input_shape.n, input_shape.h + 2 * p, input_shape.w + 2 * p, input_shape.c}),
          "pad_same_backward: shape mismatch");
  Tensor<T> out(input_shape);
  for (size_t b = 0; b < input_shape.n; ++b) {
    for (size_t y = 0; y < input_shape.h; ++y) {
      std::copy_n(grad_out.ptr() + grad_out.offset(b, y + p, p, 0), input_shape.w * input_shape.c,
                  out.ptr() + out.offset(b, y, 0, 0));
    }
  }
  return out;
}

template <typename T>
void accumulate(Tensor<T>& dst, const Tensor<T>& src) {
  require(dst.shape() == src.shape(), "accumulate: " + to_string(dst.shape()) + " vs " + to_string(src.shape()));
  auto d = dst.data();
  const auto s = src.data();
  for (size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

#define DUALSCOPE_INSTANTIATE_OPS(T)                                                                            \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, std::span<const T>, const ConvSpec&);          \
  template Tensor<T> depthwise_conv2d(const Tensor<T>&, const Tensor<T>&, const ConvSpec&);                    \
  template Tensor<T> pointwise_conv2d(const Tensor<T>&, const Tensor<T>&, std::span<const T>);                 \
  template Tensor<T> separable_conv(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::span<const T>,  \
                                    const ConvSpec&);                                                          \
  template Tensor<T> relu(const Tensor<T>&);                                                                   \
  template Tensor<T> max_pool2d(const Tensor<T>&, size_t, size_t, std::vector<size_t>*);                       \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                                                        \
  template Tensor<T> dense(const Tensor<T>&, const Tensor<T>&, std::span<const T>);                            \
  template Tensor<T> softmax(const Tensor<T>&);                                                                \
  template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                                  \
  template Tensor<T> pad_same(const Tensor<T>&, size_t);                                                       \
  template Tensor<T> mirror_horizontal(const Tensor<T>&);                                                      \
  template ConvGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&, bool, const ConvSpec&,             \
                                        const Tensor<T>&, bool);                                               \
  template ConvGrads<T> depthwise_conv2d_backward(const Tensor<T>&, const Tensor<T>&, const ConvSpec&,         \
                                                  const Tensor<T>&, bool);                                     \
  template ConvGrads<T> dense_backward(const Tensor<T>&, const Tensor<T>&, bool, const Tensor<T>&, bool);      \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                                        \
  template Tensor<T> max_pool2d_backward(const Shape4&, std::span<const size_t>, const Tensor<T>&);            \
  template Tensor<T> global_avg_pool_backward(const Shape4&, const Tensor<T>&);                                \
  template Tensor<T> softmax_backward(const Tensor<T>&, const Tensor<T>&);                                     \
  template std::pair<Tensor<T>, Tensor<T>> concat_channels_backward(size_t, const Tensor<T>&);                 \
  template Tensor<T> pad_same_backward(const Shape4&, size_t, const Tensor<T>&);                               \
  template void accumulate(Tensor<T>&, const Tensor<T>&);

DUALSCOPE_INSTANTIATE_OPS(float)
DUALSCOPE_INSTANTIATE_OPS(double)

#undef DUALSCOPE_INSTANTIATE_OPS

}  // namespace dualscope::ops
