#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

// Deterministic fork/join helper. Parallel regions must produce bit-identical
// results for every worker count, so work is split into contiguous index
// chunks, each chunk writes only its own outputs, and any reduction happens
// sequentially in index order on the caller's side.

namespace mdps {

// Worker cap: MDPS_THREADS environment variable if set and valid, otherwise
// hardware concurrency. Always at least 1. Read per call so tests can vary it.
inline int thread_count() {
  if (const char* env = std::getenv("MDPS_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Runs fn(i) for i in [0, n). Chunk boundaries depend only on n and the
// worker count; fn must not touch state shared across indices.
inline void parallel_for(std::int64_t n,
                         const std::function<void(std::int64_t)>& fn) {
  if (n <= 0) return;
  const int workers =
      static_cast<int>(std::min<std::int64_t>(thread_count(), n));
  if (workers <= 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    const std::int64_t lo = n * w / workers;
    const std::int64_t hi = n * (w + 1) / workers;
    pool.emplace_back([lo, hi, &fn] {
      for (std::int64_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace mdps
