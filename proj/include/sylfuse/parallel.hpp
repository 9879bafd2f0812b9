#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace sylfuse {

namespace detail {
inline std::atomic<int>& thread_setting() {
  static std::atomic<int> value{0};  // 0 = unset, fall back to SYLFUSE_THREADS
  return value;
}
}  // namespace detail

inline void set_thread_count(int threads) { detail::thread_setting().store(std::max(threads, 1)); }

/// Worker count: explicit setting, else SYLFUSE_THREADS, else 1.
inline int thread_count() {
  const int set = detail::thread_setting().load();
  if (set > 0) return set;
  if (const char* env = std::getenv("SYLFUSE_THREADS")) {
    try {
      return std::max(std::stoi(env), 1);
    } catch (...) {
      return 1;
    }
  }
  return 1;
}

/// Runs body(i) for i in [0, count). Each index is processed by exactly one worker and
/// bodies must only write to index-owned state, so results do not depend on scheduling.
template <typename Body>
void parallel_for(long count, Body&& body) {
  const int workers = static_cast<int>(std::min<long>(thread_count(), count));
  if (workers <= 1) {
    for (long i = 0; i < count; ++i) body(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (long i = w; i < count; i += workers) body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace sylfuse
