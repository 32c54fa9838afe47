#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace xgen {

namespace detail {
inline thread_local int parallel_depth = 0;
}

// Dynamic work sharing over [0, n). Each index writes only its own slot,
// so results are independent of thread count. Nested calls run inline.
template <typename Body>
inline void parallel_for(size_t n, Body&& body) {
  if (n == 0) return;
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (detail::parallel_depth > 0 || hw == 1 || n == 1) {
    for (size_t i = 0; i < n; ++i) body(i);
    return;
  }
  size_t n_threads = std::min<size_t>(hw, n);
  std::atomic<size_t> next{0};
  std::vector<std::thread> threads;
  threads.reserve(n_threads);
  for (size_t w = 0; w < n_threads; ++w) {
    threads.emplace_back([&] {
      detail::parallel_depth = 1;
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= n) break;
        body(i);
      }
    });
  }
  for (auto& t : threads) t.join();
}

}  // namespace xgen
