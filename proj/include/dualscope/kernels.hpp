#pragma once

// Inner-loop primitives shared by every convolution, pooling and dense op.
//
// Each primitive has a scalar reference implementation and, where the CPU
// supports it, an AVX2+FMA variant. The variant is chosen once at first use
// from CPUID, and can be pinned with DUALSCOPE_SIMD=scalar|avx2 or
// set_kernel_isa(). All variants accumulate in double precision.

#include <cstddef>
#include <string_view>

namespace dualscope::kernels {

enum class Isa { Scalar, Avx2 };

struct KernelTable {
  Isa isa;
  std::string_view name;
  /// acc[i] += a * x[i]
  void (*axpy_acc)(double* acc, float a, const float* x, std::size_t n);
  /// acc[i] += x[i] * y[i]
  void (*mul_acc)(double* acc, const float* x, const float* y, std::size_t n);
  /// sum_i x[i] * y[i]
  double (*dot)(const float* x, const float* y, std::size_t n);
  /// acc[i] += x[i]
  void (*add_acc)(double* acc, const float* x, std::size_t n);
  /// out[i] = float(acc[i] + bias[i]); bias may be null
  void (*store)(float* out, const double* acc, const float* bias, std::size_t n);
};

const KernelTable& scalar_table() noexcept;

/// AVX2 table, or nullptr when the build or the CPU lacks AVX2/FMA.
const KernelTable* avx2_table() noexcept;

/// The table used by the tensor ops.
const KernelTable& active() noexcept;

bool isa_available(Isa isa) noexcept;

/// Pins the active table. Throws std::invalid_argument if unavailable.
void set_kernel_isa(Isa isa);

Isa best_available_isa() noexcept;

/// Restores the previously active ISA on scope exit.
class ScopedIsa {
 public:
  explicit ScopedIsa(Isa isa);
  ~ScopedIsa();
  ScopedIsa(const ScopedIsa&) = delete;
  ScopedIsa& operator=(const ScopedIsa&) = delete;

 private:
  Isa previous_;
};

// Double-precision element paths (used by the gradient-checking
// instantiation) are plain loops; there is no SIMD variant for them.
inline void axpy_acc(double* acc, double a, const double* x, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) acc[i] += a * x[i];
}
inline void mul_acc(double* acc, const double* x, const double* y, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) acc[i] += x[i] * y[i];
}
inline double dot(const double* x, const double* y, std::size_t n) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}
inline void add_acc(double* acc, const double* x, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) acc[i] += x[i];
}
inline void store(double* out, const double* acc, const double* bias, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) out[i] = acc[i] + (bias ? bias[i] : 0.0);
}

inline void axpy_acc(double* acc, float a, const float* x, std::size_t n) noexcept {
  active().axpy_acc(acc, a, x, n);
}
inline void mul_acc(double* acc, const float* x, const float* y, std::size_t n) noexcept {
  active().mul_acc(acc, x, y, n);
}
inline double dot(const float* x, const float* y, std::size_t n) noexcept { return active().dot(x, y, n); }
inline void add_acc(double* acc, const float* x, std::size_t n) noexcept { active().add_acc(acc, x, n); }
inline void store(float* out, const double* acc, const float* bias, std::size_t n) noexcept {
  active().store(out, acc, bias, n);
}

}  // namespace dualscope::kernels
