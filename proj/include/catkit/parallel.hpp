#pragma once

#include <atomic>
#include <thread>
#include <vector>

namespace catkit {

// Runs fn(i) for i in [0, n). With threads > 1 the iterations are claimed from
// an atomic counter; callers must write results only into per-i slots so the
// output is identical for every thread count.
template <class F>
void parallel_for(int n, int threads, F&& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  const int n_workers = std::min(threads, n);
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(n_workers);
  for (int w = 0; w < n_workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace catkit
