#pragma once

// Independent loop-nest oracles and small helpers shared by the unit and
// acceptance tests. Nothing here calls into the library's numeric code.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "dualscope/tensor.hpp"

namespace dualscope::testing {

template <typename T>
BasicTensor4<T> random_tensor(Shape4 s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  BasicTensor4<T> t(s);
  for (T& v : t.data()) v = static_cast<T>(d(rng));
  return t;
}

// Direct convolution with explicit zero padding `pad` on every side.
template <typename T>
BasicTensor4<T> naive_conv(const BasicTensor4<T>& x, const BasicTensor4<T>& w, const std::vector<T>& bias,
                           std::size_t stride, std::size_t pad) {
  const std::size_t f = w.shape().h;
  const std::size_t cin = x.shape().c;
  const std::size_t cout = w.shape().c;
  const std::size_t oh = (x.shape().h + 2 * pad - f) / stride + 1;
  const std::size_t ow = (x.shape().w + 2 * pad - f) / stride + 1;
  BasicTensor4<T> out(Shape4{x.shape().n, oh, ow, cout});
  for (std::size_t b = 0; b < x.shape().n; ++b)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox)
        for (std::size_t co = 0; co < cout; ++co) {
          long double s = bias.empty() ? 0.0L : bias[co];
          for (std::size_t ky = 0; ky < f; ++ky)
            for (std::size_t kx = 0; kx < f; ++kx) {
              const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
              const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(x.shape().h) || ix >= static_cast<long>(x.shape().w))
                continue;
              for (std::size_t ci = 0; ci < cin; ++ci)
                s += static_cast<long double>(x.at(b, iy, ix, ci)) * w.at(ky, kx, ci, co);
            }
          out.at(b, oy, ox, co) = static_cast<T>(s);
        }
  return out;
}

template <typename T>
BasicTensor4<T> naive_depthwise(const BasicTensor4<T>& x, const BasicTensor4<T>& w, std::size_t stride,
                                std::size_t pad) {
  const std::size_t f = w.shape().h;
  const std::size_t c = x.shape().c;
  const std::size_t oh = (x.shape().h + 2 * pad - f) / stride + 1;
  const std::size_t ow = (x.shape().w + 2 * pad - f) / stride + 1;
  BasicTensor4<T> out(Shape4{x.shape().n, oh, ow, c});
  for (std::size_t b = 0; b < x.shape().n; ++b)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox)
        for (std::size_t ch = 0; ch < c; ++ch) {
          long double s = 0.0L;
          for (std::size_t ky = 0; ky < f; ++ky)
            for (std::size_t kx = 0; kx < f; ++kx) {
              const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
              const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(x.shape().h) || ix >= static_cast<long>(x.shape().w))
                continue;
              s += static_cast<long double>(x.at(b, iy, ix, ch)) * w.at(ky, kx, ch, 0);
            }
          out.at(b, oy, ox, ch) = static_cast<T>(s);
        }
  return out;
}

// Largest |a-b| / max(1, |b|) over two equally shaped tensors.
template <typename T>
double max_rel_diff(const BasicTensor4<T>& a, const BasicTensor4<T>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
    worst = std::max(worst, d / std::max(1.0, std::abs(static_cast<double>(b[i]))));
  }
  return worst;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("dualscope_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace dualscope::testing
