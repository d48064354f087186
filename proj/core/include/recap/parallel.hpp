#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace recap {

// Runs fn(i) for i in [0, count) on at most `max_parallel` threads. The first
// exception thrown by any fn is rethrown after all workers finish; remaining
// indices are skipped once a failure is seen.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t max_parallel, Fn&& fn) {
  const auto workers = std::min(count, std::max<std::size_t>(1, max_parallel));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mu;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (auto i = next.fetch_add(1); i < count && !failed.load();
             i = next.fetch_add(1)) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mu);
            if (!first_error) first_error = std::current_exception();
            failed = true;
          }
        }
      });
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace recap
