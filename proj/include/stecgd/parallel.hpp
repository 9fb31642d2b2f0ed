#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace stecgd {

// Fixed block size for reductions over samples. Partial results are formed per
// block and combined in block order, so the floating-point result does not
// depend on how many workers computed the blocks.
inline constexpr std::size_t kReductionBlock = 256;

inline std::size_t block_count(std::size_t items) {
  return (items + kReductionBlock - 1) / kReductionBlock;
}

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Ordering of
/// side effects is the caller's concern.
template <typename Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  const unsigned n = static_cast<unsigned>(std::min<std::size_t>(workers, count));
  for (unsigned w = 0; w < n; ++w) {
    pool.emplace_back([&] {
      try {
        for (std::size_t i = next++; i < count; i = next++) fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Runs fn(block, begin, end) for every block of [0, items), spread over
/// `workers` threads (1 = inline).
template <typename Fn>
void for_each_block(std::size_t items, unsigned workers, Fn&& fn) {
  parallel_for(block_count(items), workers, [&](std::size_t b) {
    const std::size_t begin = b * kReductionBlock;
    fn(b, begin, std::min(items, begin + kReductionBlock));
  });
}

}  // namespace stecgd
