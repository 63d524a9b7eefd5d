#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <thread>
#include <vector>

namespace bsca {

namespace detail {
inline std::atomic<int>& thread_budget() {
  static std::atomic<int> budget{0};  // 0 = not set yet, resolve lazily
  return budget;
}
}  // namespace detail

inline void set_max_threads(int n) {
  detail::thread_budget().store(n < 1 ? 1 : n);
}

inline int max_threads() {
  int n = detail::thread_budget().load();
  if (n == 0) {
    n = static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    detail::thread_budget().store(n);
  }
  return n;
}

/// Runs body(begin, end) over a static partition of [0, n) into contiguous
/// chunks, one per worker. Each index is processed by exactly one worker in
/// ascending order within its chunk, so results do not depend on the thread
/// count as long as workers touch disjoint outputs.
template <class F>
void parallel_for(std::int64_t n, F&& body) {
  if (n <= 0) return;
  const int workers = static_cast<int>(std::min<std::int64_t>(max_threads(), n));
  if (workers <= 1) {
    body(static_cast<std::int64_t>(0), n);
    return;
  }
  const std::int64_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers - 1));
  for (int w = 1; w < workers; ++w) {
    const std::int64_t begin = w * chunk;
    const std::int64_t end = std::min<std::int64_t>(begin + chunk, n);
    if (begin >= end) break;
    pool.emplace_back([&body, begin, end] { body(begin, end); });
  }
  body(static_cast<std::int64_t>(0), std::min<std::int64_t>(chunk, n));
  for (auto& t : pool) t.join();
}

}  // namespace bsca
