#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace scenebench {

/// Runs fn(i) for i in [0, n) on at most `bound` threads. The first exception
/// thrown by any call is rethrown after all workers finish; indices not yet
/// started when it was thrown are skipped.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t bound, Fn&& fn) {
  bound = std::max<std::size_t>(1, std::min(bound, n));
  if (bound <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> workers;
    workers.reserve(bound);
    for (std::size_t w = 0; w < bound; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < n && !failed; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            failed = true;
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace scenebench
