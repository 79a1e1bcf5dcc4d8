#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace dualscope {

/// Upper bound on threads used inside a single kernel call.
/// Read once from DUALSCOPE_THREADS; defaults to the hardware concurrency.
std::size_t kernel_thread_cap() noexcept;

/// Overrides the cap (tests and the CLI's --jobs split use this).
void set_kernel_thread_cap(std::size_t threads) noexcept;

/// Runs fn(begin, end) over [0, count) split into contiguous chunks.
///
/// Chunks write disjoint outputs, so the result does not depend on the
/// thread count. Work below `min_items_per_thread` per thread stays on the
/// calling thread.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t min_items_per_thread, Fn&& fn) {
  const std::size_t cap = kernel_thread_cap();
  const std::size_t by_work = min_items_per_thread == 0 ? count : count / min_items_per_thread;
  const std::size_t threads = std::max<std::size_t>(1, std::min(cap, by_work));
  if (threads <= 1) {
    fn(std::size_t{0}, count);
    return;
  }
  const std::size_t chunk = (count + threads - 1) / threads;
  std::vector<std::jthread> workers;
  workers.reserve(threads - 1);
  for (std::size_t t = 1; t < threads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    workers.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  fn(std::size_t{0}, std::min(count, chunk));
}

}  // namespace dualscope
