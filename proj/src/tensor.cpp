#include "dualscope/tensor.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <string>

#include "dualscope/parallel.hpp"

namespace dualscope {

std::string to_string(const Shape4& s) {
  return "[" + std::to_string(s.n) + "," + std::to_string(s.h) + "," + std::to_string(s.w) + "," +
         std::to_string(s.c) + "]";
}

std::ostream& operator<<(std::ostream& os, const Shape4& s) { return os << to_string(s); }

template <typename T>
BasicTensor4<T> BasicTensor4<T>::batch_slice(std::size_t first, std::size_t count) const {
  if (first + count > shape_.n) {
    throw ShapeError("batch slice [" + std::to_string(first) + ", " + std::to_string(first + count) +
                     ") out of range for " + to_string(shape_));
  }
  const std::size_t per = shape_.per_sample();
  Shape4 s = shape_;
  s.n = count;
  const auto begin = data_.begin() + static_cast<std::ptrdiff_t>(first * per);
  return BasicTensor4(s, std::vector<T>(begin, begin + static_cast<std::ptrdiff_t>(count * per)));
}

template <typename T>
bool BasicTensor4<T>::all_finite() const noexcept {
  for (const T v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template <typename T>
BasicTensor4<T> stack_batch(std::span<const BasicTensor4<T>* const> items) {
  if (items.empty()) return {};
  Shape4 s = items.front()->shape();
  const std::size_t per = s.per_sample();
  std::size_t total = 0;
  for (const auto* t : items) {
    const Shape4& ts = t->shape();
    if (ts.h != s.h || ts.w != s.w || ts.c != s.c) {
      throw ShapeError("stack_batch: " + to_string(ts) + " vs " + to_string(s));
    }
    total += ts.n;
  }
  std::vector<T> data;
  data.reserve(total * per);
  for (const auto* t : items) data.insert(data.end(), t->data().begin(), t->data().end());
  s.n = total;
  return BasicTensor4<T>(s, std::move(data));
}

std::size_t out_extent(std::size_t n_in, std::size_t f, std::size_t s) {
  if (f == 0 || s == 0) throw GeometryError("kernel size and stride must be positive");
  if (n_in < f) {
    throw GeometryError("kernel " + std::to_string(f) + " does not fit extent " + std::to_string(n_in));
  }
  return (n_in - f) / s + 1;
}

std::size_t conv_out_extent(std::size_t n_in, const ConvSpec& spec) {
  if (spec.padding == Padding::Same) {
    if (spec.stride != 1) throw GeometryError("Same padding requires stride 1");
    if (spec.kernel % 2 == 0) throw GeometryError("Same padding requires an odd kernel");
    if (n_in == 0) throw GeometryError("empty spatial extent");
    return n_in;
  }
  return out_extent(n_in, spec.kernel, spec.stride);
}

namespace {
std::size_t initial_thread_cap() noexcept {
  if (const char* env = std::getenv("DUALSCOPE_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<std::size_t>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}
std::atomic<std::size_t>& thread_cap_ref() noexcept {
  static std::atomic<std::size_t> cap{initial_thread_cap()};
  return cap;
}
}  // namespace

std::size_t kernel_thread_cap() noexcept { return thread_cap_ref(); }
void set_kernel_thread_cap(std::size_t threads) noexcept { thread_cap_ref() = threads == 0 ? 1 : threads; }

template class BasicTensor4<float>;
template class BasicTensor4<double>;
template Tensor4 stack_batch<float>(std::span<const Tensor4* const>);
template Tensor4d stack_batch<double>(std::span<const Tensor4d* const>);

}  // namespace dualscope
