#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace hnm {

// Process-wide worker count used by every order-stable parallel loop.
// 0 means "use hardware concurrency".
void set_workers(unsigned workers);
unsigned workers();

// Runs body(i) for i in [0, n). Work is claimed in contiguous blocks; callers
// write results into slot i, so output order never depends on scheduling.
// The first exception thrown by any worker is rethrown on the calling thread.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
  const unsigned w = std::min<std::size_t>(workers(), std::max<std::size_t>(n, 1));
  if (w <= 1 || n < 64) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  const std::size_t block = std::max<std::size_t>(16, n / (w * 8));
  std::atomic<std::size_t> cursor{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto run = [&] {
    for (;;) {
      const std::size_t begin = cursor.fetch_add(block);
      if (begin >= n) return;
      const std::size_t end = std::min(n, begin + block);
      try {
        for (std::size_t i = begin; i < end; ++i) body(i);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
        cursor.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(w - 1);
  for (unsigned t = 1; t < w; ++t) pool.emplace_back(run);
  run();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

template <typename T, typename In, typename Fn>
std::vector<T> parallel_map(const std::vector<In>& in, Fn&& fn) {
  std::vector<T> out(in.size());
  parallel_for(in.size(), [&](std::size_t i) { out[i] = fn(in[i]); });
  return out;
}

}  // namespace hnm
