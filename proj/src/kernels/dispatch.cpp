#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "dualscope/kernels.hpp"
#include "kernels_impl.hpp"

namespace dualscope::kernels {
namespace {

constexpr KernelTable kScalar{Isa::Scalar, "scalar", &scalar::axpy_acc, &scalar::mul_acc,
                              &scalar::dot,  &scalar::add_acc, &scalar::store};

#if defined(DUALSCOPE_HAVE_AVX2)
constexpr KernelTable kAvx2{Isa::Avx2, "avx2", &avx2::axpy_acc, &avx2::mul_acc,
                            &avx2::dot,  &avx2::add_acc, &avx2::store};
#endif

bool cpu_has_avx2() noexcept {
#if defined(DUALSCOPE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* table_for(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar:
      return &kScalar;
    case Isa::Avx2:
      return avx2_table();
  }
  return nullptr;
}

const KernelTable* initial_table() {
  if (const char* env = std::getenv("DUALSCOPE_SIMD")) {
    const std::string want(env);
    if (want == "scalar") return &kScalar;
    if (want == "avx2" && avx2_table()) return avx2_table();
  }
  return table_for(best_available_isa());
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const KernelTable& scalar_table() noexcept { return kScalar; }

const KernelTable* avx2_table() noexcept {
#if defined(DUALSCOPE_HAVE_AVX2)
  static const bool ok = cpu_has_avx2();
  return ok ? &kAvx2 : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() noexcept { return *current().load(std::memory_order_relaxed); }

bool isa_available(Isa isa) noexcept { return table_for(isa) != nullptr; }

Isa best_available_isa() noexcept { return avx2_table() ? Isa::Avx2 : Isa::Scalar; }

void set_kernel_isa(Isa isa) {
  const KernelTable* t = table_for(isa);
  if (!t) throw std::invalid_argument("requested kernel ISA is not available on this CPU/build");
  current().store(t, std::memory_order_relaxed);
}

ScopedIsa::ScopedIsa(Isa isa) : previous_(active().isa) { set_kernel_isa(isa); }
ScopedIsa::~ScopedIsa() { set_kernel_isa(previous_); }

}  // namespace dualscope::kernels
