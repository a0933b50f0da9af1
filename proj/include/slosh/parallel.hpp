#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace slosh {

/// Process-wide worker count; 1 unless set from the CLI.
int thread_count();
void set_thread_count(int n);

/// Static contiguous partition of [0, n) over thread_count() workers. Each
/// index is visited exactly once and by a worker chosen independently of
/// timing, so loops that only write per-index outputs stay bit-reproducible.
template <class F>
void parallel_for(std::size_t n, F&& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), n);
  if (workers <= 1 || n < 64) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t b = w * chunk, e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] {
      for (std::size_t i = b; i < e; ++i) fn(i);
    });
  }
  for (std::size_t i = 0; i < std::min(n, chunk); ++i) fn(i);
}

}  // namespace slosh
