#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace minresfem {

inline int& detail_max_threads() {
  static int n = 1;
  return n;
}

inline void set_max_threads(int n) { detail_max_threads() = std::max(1, n); }

inline int max_threads() { return detail_max_threads(); }

// Partitions [0, n) into contiguous chunks and calls fn(begin, end, chunk) on
// each, concurrently when more than one thread is allowed. Chunk boundaries
// depend only on n and the thread setting, so callers that combine per-chunk
// results in chunk order get reproducible output.
template <class Fn>
void parallel_chunks(int n, Fn&& fn) {
  if (n <= 0) return;
  const int nt = std::min(max_threads(), n);
  if (nt == 1) {
    fn(0, n, 0);
    return;
  }
  const int chunk = (n + nt - 1) / nt;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(nt));
  for (int c = 0; c < nt; ++c) {
    const int b = c * chunk;
    const int e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([b, e, c, &fn] { fn(b, e, c); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace minresfem
