#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace advgray {

inline unsigned worker_count() {
  static const unsigned n = [] {
    if (const char* env = std::getenv("ADVGRAY_THREADS")) {
      long v = std::strtol(env, nullptr, 10);
      if (v >= 1) return static_cast<unsigned>(v);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1u : hw;
  }();
  return n;
}

// Runs fn(begin, end) over a contiguous partition of [0, n). Every index is
// processed by exactly one worker and each worker's range is contiguous, so
// any computation whose per-index results are independent is bit-identical
// to a sequential run regardless of thread count.
inline void parallel_for(std::size_t n,
                         const std::function<void(std::size_t, std::size_t)>& fn) {
  const unsigned workers = worker_count();
  if (n == 0) return;
  if (workers <= 1 || n < 2) {
    fn(0, n);
    return;
  }
  const std::size_t parts = std::min<std::size_t>(workers, n);
  const std::size_t chunk = (n + parts - 1) / parts;
  std::vector<std::thread> pool;
  pool.reserve(parts);
  for (std::size_t p = 0; p < parts; ++p) {
    const std::size_t b = p * chunk;
    const std::size_t e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace advgray
