#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace distress::detail {

/// Runs task(0..n-1) on up to `jobs` threads and rethrows the failure of
/// the lowest-numbered task, so errors do not depend on scheduling.
template <class Task>
void run_tasks(std::size_t n, unsigned jobs, Task&& task) {
  std::vector<std::exception_ptr> errors(n);
  const auto workers = static_cast<std::size_t>(std::max(1u, jobs));
  if (workers <= 1 || n <= 1) {
    for (std::size_t t = 0; t < n; ++t) {
      try {
        task(t);
      } catch (...) {
        errors[t] = std::current_exception();
        break;
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t t = next++; t < n; t = next++) {
        try {
          task(t);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, n); ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace distress::detail
