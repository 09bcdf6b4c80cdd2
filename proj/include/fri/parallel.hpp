#pragma once
// Replica-level worker pool.  Workers pull replica indices from an atomic
// counter and write results only into pre-sized per-replica slots, so the
// bytes of every output are a pure function of (config, master seed) and in
// particular independent of the worker count.

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

namespace fri {

// Thread count resolution order: explicit request > FRI_LAB_THREADS
// environment variable > hardware concurrency > 1.
inline int resolve_thread_count(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("FRI_LAB_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs body(replica) for every replica in [0, replicas).  Each index is
// claimed exactly once; the first exception from any worker aborts the
// remaining work and is rethrown on the calling thread.  With one thread the
// bodies run inline on the caller.
template <typename Body>
inline void for_each_replica(int64_t replicas, int threads, Body&& body) {
  if (replicas <= 0) return;
  const int workers =
      static_cast<int>(std::min<int64_t>(resolve_thread_count(threads),
                                         replicas));
  if (workers <= 1) {
    for (int64_t r = 0; r < replicas; ++r) body(r);
    return;
  }

  std::atomic<int64_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto work = [&]() {
    for (;;) {
      if (failed.load(std::memory_order_relaxed)) return;
      const int64_t r = next.fetch_add(1, std::memory_order_relaxed);
      if (r >= replicas) return;
      try {
        body(r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace fri
