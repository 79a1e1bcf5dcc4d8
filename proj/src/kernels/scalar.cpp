#include "kernels_impl.hpp"

namespace dualscope::kernels::scalar {

void axpy_acc(double* acc, float a, const float* x, std::size_t n) noexcept {
  const double da = a;
  for (std::size_t i = 0; i < n; ++i) acc[i] += da * static_cast<double>(x[i]);
}

void mul_acc(double* acc, const float* x, const float* y, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) acc[i] += static_cast<double>(x[i]) * static_cast<double>(y[i]);
}

double dot(const float* x, const float* y, std::size_t n) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(x[i]) * static_cast<double>(y[i]);
  return s;
}

void add_acc(double* acc, const float* x, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) acc[i] += static_cast<double>(x[i]);
}

void store(float* out, const double* acc, const float* bias, std::size_t n) noexcept {
  if (bias) {
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(acc[i] + static_cast<double>(bias[i]));
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(acc[i]);
  }
}

}  // namespace dualscope::kernels::scalar
