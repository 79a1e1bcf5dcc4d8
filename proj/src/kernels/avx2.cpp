// Compiled with -mavx2 -mfma. Only reached after a CPUID check.

#include <immintrin.h>

#include "kernels_impl.hpp"

namespace dualscope::kernels::avx2 {
namespace {

inline double hsum(__m256d v) noexcept {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sw = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sw));
}

}  // namespace

void axpy_acc(double* acc, float a, const float* x, std::size_t n) noexcept {
  const __m256d va = _mm256_set1_pd(static_cast<double>(a));
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 xf = _mm256_loadu_ps(x + i);
    const __m256d x0 = _mm256_cvtps_pd(_mm256_castps256_ps128(xf));
    const __m256d x1 = _mm256_cvtps_pd(_mm256_extractf128_ps(xf, 1));
    _mm256_storeu_pd(acc + i, _mm256_fmadd_pd(va, x0, _mm256_loadu_pd(acc + i)));
    _mm256_storeu_pd(acc + i + 4, _mm256_fmadd_pd(va, x1, _mm256_loadu_pd(acc + i + 4)));
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d x0 = _mm256_cvtps_pd(_mm_loadu_ps(x + i));
    _mm256_storeu_pd(acc + i, _mm256_fmadd_pd(va, x0, _mm256_loadu_pd(acc + i)));
  }
  const double da = a;
  for (; i < n; ++i) acc[i] += da * static_cast<double>(x[i]);
}

void mul_acc(double* acc, const float* x, const float* y, std::size_t n) noexcept {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 xf = _mm256_loadu_ps(x + i);
    const __m256 yf = _mm256_loadu_ps(y + i);
    const __m256d x0 = _mm256_cvtps_pd(_mm256_castps256_ps128(xf));
    const __m256d x1 = _mm256_cvtps_pd(_mm256_extractf128_ps(xf, 1));
    const __m256d y0 = _mm256_cvtps_pd(_mm256_castps256_ps128(yf));
    const __m256d y1 = _mm256_cvtps_pd(_mm256_extractf128_ps(yf, 1));
    _mm256_storeu_pd(acc + i, _mm256_fmadd_pd(x0, y0, _mm256_loadu_pd(acc + i)));
    _mm256_storeu_pd(acc + i + 4, _mm256_fmadd_pd(x1, y1, _mm256_loadu_pd(acc + i + 4)));
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d x0 = _mm256_cvtps_pd(_mm_loadu_ps(x + i));
    const __m256d y0 = _mm256_cvtps_pd(_mm_loadu_ps(y + i));
    _mm256_storeu_pd(acc + i, _mm256_fmadd_pd(x0, y0, _mm256_loadu_pd(acc + i)));
  }
  for (; i < n; ++i) acc[i] += static_cast<double>(x[i]) * static_cast<double>(y[i]);
}

double dot(const float* x, const float* y, std::size_t n) noexcept {
  __m256d s0 = _mm256_setzero_pd();
  __m256d s1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 xf = _mm256_loadu_ps(x + i);
    const __m256 yf = _mm256_loadu_ps(y + i);
    s0 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(xf)),
                         _mm256_cvtps_pd(_mm256_castps256_ps128(yf)), s0);
    s1 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(xf, 1)),
                         _mm256_cvtps_pd(_mm256_extractf128_ps(yf, 1)), s1);
  }
  double s = hsum(_mm256_add_pd(s0, s1));
  for (; i < n; ++i) s += static_cast<double>(x[i]) * static_cast<double>(y[i]);
  return s;
}

void add_acc(double* acc, const float* x, std::size_t n) noexcept {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x0 = _mm256_cvtps_pd(_mm_loadu_ps(x + i));
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), x0));
  }
  for (; i < n; ++i) acc[i] += static_cast<double>(x[i]);
}

void store(float* out, const double* acc, const float* bias, std::size_t n) noexcept {
  std::size_t i = 0;
  if (bias) {
    for (; i + 4 <= n; i += 4) {
      const __m256d b = _mm256_cvtps_pd(_mm_loadu_ps(bias + i));
      _mm_storeu_ps(out + i, _mm256_cvtpd_ps(_mm256_add_pd(_mm256_loadu_pd(acc + i), b)));
    }
    for (; i < n; ++i) out[i] = static_cast<float>(acc[i] + static_cast<double>(bias[i]));
  } else {
    for (; i + 4 <= n; i += 4) _mm_storeu_ps(out + i, _mm256_cvtpd_ps(_mm256_loadu_pd(acc + i)));
    for (; i < n; ++i) out[i] = static_cast<float>(acc[i]);
  }
}

}  // namespace dualscope::kernels::avx2
