#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace hoif {

// Process-wide worker cap, set from the CLI --threads flag.
inline std::size_t& thread_cap() {
  static std::size_t cap = std::thread::hardware_concurrency() ? std::thread::hardware_concurrency() : 1;
  return cap;
}

// Runs fn(i) for i in [0, n). Each index writes only its own slot, so results
// are identical regardless of scheduling; callers aggregate in index order.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(thread_cap(), n == 0 ? std::size_t{1} : n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr err;
  std::atomic<bool> failed{false};
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n || failed.load()) return;
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) err = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failed.load() && err) std::rethrow_exception(err);
}

}  // namespace hoif
