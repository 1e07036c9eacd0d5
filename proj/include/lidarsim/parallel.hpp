#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace lidarsim {

inline unsigned default_thread_count() {
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs func(i) for i in [0, count) on up to `threads` workers, handing out
// `grain`-sized chunks. The first exception is rethrown on the caller.
template <class Func>
void parallel_for(std::size_t count, Func&& func, std::size_t grain = 64,
                  unsigned threads = default_thread_count()) {
  if (count == 0) return;
  grain = std::max<std::size_t>(grain, 1);
  auto chunks = (count + grain - 1) / grain;
  auto workers = static_cast<unsigned>(std::min<std::size_t>(threads, chunks));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) func(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    while (!failed.load(std::memory_order_relaxed)) {
      auto begin = next.fetch_add(grain);
      if (begin >= count) return;
      auto end = std::min(count, begin + grain);
      try {
        for (auto i = begin; i < end; ++i) func(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  pool.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace lidarsim
