// Minimal thread-pool-free parallel_for. Worker count from HCF_WORKERS
// (default: hardware up to 4). Items must be independent; results are
// written by index so the output order is deterministic.
#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace hcf {

inline int worker_count() {
  if (const char* env = std::getenv("HCF_WORKERS")) {
    const int w = std::atoi(env);
    if (w >= 1) return w;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(hw == 0 ? 1 : (hw > 4 ? 4 : hw));
}

template <typename Fn>
void parallel_for(int count, Fn&& fn) {
  const int workers = std::min(worker_count(), count);
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= count || failed.load()) return;
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failed.load() && error) std::rethrow_exception(error);
}

}  // namespace hcf
