#pragma once

#include <algorithm>
#include <cstdint>
#include <thread>
#include <vector>

namespace cinesplat {

// Static block partition over [begin, end). Each worker owns one contiguous
// range, so as long as iterations write disjoint outputs the result is
// identical for every thread count.
template <typename Fn>
void parallel_for(std::int64_t begin, std::int64_t end, int n_threads, Fn&& fn) {
  const std::int64_t count = end - begin;
  if (count <= 0) return;
  int workers = std::max(1, n_threads);
  workers = static_cast<int>(std::min<std::int64_t>(workers, count));
  if (workers == 1) {
    for (std::int64_t i = begin; i < end; ++i) fn(i);
    return;
  }
  const std::int64_t chunk = (count + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    const std::int64_t lo = begin + w * chunk;
    const std::int64_t hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::int64_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

// Same partition, but hands each worker its whole range at once so per-thread
// scratch (FFT plans, buffers) can be built once per chunk.
template <typename Fn>
void parallel_blocks(std::int64_t begin, std::int64_t end, int n_threads, Fn&& fn) {
  const std::int64_t count = end - begin;
  if (count <= 0) return;
  int workers = std::max(1, n_threads);
  workers = static_cast<int>(std::min<std::int64_t>(workers, count));
  if (workers == 1) {
    fn(begin, end);
    return;
  }
  const std::int64_t chunk = (count + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    const std::int64_t lo = begin + w * chunk;
    const std::int64_t hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] { fn(lo, hi); });
  }
  for (auto& t : pool) t.join();
}

inline int default_thread_count() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace cinesplat
