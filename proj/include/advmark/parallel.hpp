#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace advmark {

/// Runs produce(i) for i in [0, n) on up to `workers` threads and feeds the
/// results to consume(i, result) strictly in index order on the calling
/// thread. The ordered consumer keeps record streams deterministic no matter
/// how the evaluations interleave. workers <= 1 degrades to a serial loop.
template <typename T, typename Produce, typename Consume>
void parallel_for_ordered(std::size_t n, int workers, Produce produce, Consume consume) {
  if (n == 0) return;
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) consume(i, produce(i));
    return;
  }

  std::vector<std::optional<T>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::mutex mtx;
  std::condition_variable ready;
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      std::optional<T> value;
      std::exception_ptr err;
      try {
        value.emplace(produce(i));
      } catch (...) {
        err = std::current_exception();
      }
      {
        std::lock_guard<std::mutex> lock(mtx);
        slots[i] = std::move(value);
        errors[i] = err;
      }
      ready.notify_all();
    }
  };

  const int thread_count = static_cast<int>(
      std::min<std::size_t>(static_cast<std::size_t>(workers), n));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(thread_count));
  for (int t = 0; t < thread_count; ++t) pool.emplace_back(work);

  std::exception_ptr first_error;
  for (std::size_t i = 0; i < n; ++i) {
    std::unique_lock<std::mutex> lock(mtx);
    ready.wait(lock, [&] { return slots[i].has_value() || errors[i]; });
    if (errors[i] && !first_error) first_error = errors[i];
    if (!first_error) {
      T value = std::move(*slots[i]);
      slots[i].reset();
      lock.unlock();
      consume(i, std::move(value));
    }
  }
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace advmark
