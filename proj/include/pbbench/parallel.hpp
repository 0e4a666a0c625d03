#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace pbbench {

// Runs fn(0..n-1) over `jobs` worker threads. Work items must be independent;
// the first exception thrown by any worker is rethrown on the caller after
// all workers join.
inline void parallel_for_index(std::size_t n, int jobs,
                               const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  if (jobs < 1) jobs = 1;
  std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      while (true) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace pbbench
