#pragma once

#include <cstddef>

namespace dualscope::kernels {

namespace scalar {
void axpy_acc(double* acc, float a, const float* x, std::size_t n) noexcept;
void mul_acc(double* acc, const float* x, const float* y, std::size_t n) noexcept;
double dot(const float* x, const float* y, std::size_t n) noexcept;
void add_acc(double* acc, const float* x, std::size_t n) noexcept;
void store(float* out, const double* acc, const float* bias, std::size_t n) noexcept;
}  // namespace scalar

#if defined(DUALSCOPE_HAVE_AVX2)
namespace avx2 {
void axpy_acc(double* acc, float a, const float* x, std::size_t n) noexcept;
void mul_acc(double* acc, const float* x, const float* y, std::size_t n) noexcept;
double dot(const float* x, const float* y, std::size_t n) noexcept;
void add_acc(double* acc, const float* x, std::size_t n) noexcept;
void store(float* out, const double* acc, const float* bias, std::size_t n) noexcept;
}  // namespace avx2
#endif

}  // namespace dualscope::kernels
