#pragma once

// Deterministic index-space parallelism: work items write results into
// per-index slots, so serial and threaded runs aggregate identically.

#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace dosekit {

inline unsigned default_threads() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : hc;
}

inline void parallel_for_indexed(std::size_t n, unsigned n_threads,
                                 const std::function<void(std::size_t)>& body) {
  if (n == 0) return;
  if (n_threads <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(n_threads, n));
  std::vector<std::thread> threads;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (unsigned t = 0; t < workers; ++t) {
    threads.emplace_back([&, t]() {
      try {
        for (std::size_t i = t; i < n; i += workers) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace dosekit
