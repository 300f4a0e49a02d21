#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace spnrank {

// Process-wide worker limit; the CLI sets it from --threads.
inline std::size_t& max_threads() {
  static std::size_t n = 1;
  return n;
}

// Runs body(chunk_index, begin, end) over [0, n) split into contiguous
// chunks. Chunk boundaries depend only on n and the chunk count, so a
// caller that reduces per-chunk results in chunk order gets the same
// answer for any thread count.
template <typename Body>
void parallel_chunks(std::size_t n, std::size_t chunks, Body&& body) {
  if (n == 0) return;
  chunks = std::max<std::size_t>(1, std::min(chunks, n));
  const auto bounds = [&](std::size_t c) { return n * c / chunks; };
  const std::size_t workers = std::min(chunks, std::max<std::size_t>(1, max_threads()));
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) body(c, bounds(c), bounds(c + 1));
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t c = next++; c < chunks; c = next++) {
        try {
          body(c, bounds(c), bounds(c + 1));
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace spnrank
