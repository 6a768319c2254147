#ifndef EMBEDFUSE_PARALLEL_HPP
#define EMBEDFUSE_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace embedfuse {

/// Worker cap used by batch operations. Initialised from EMBEDFUSE_THREADS,
/// otherwise from std::thread::hardware_concurrency().
std::size_t thread_count();

/// Zero restores the default.
void set_thread_count(std::size_t n);

/**
 * Runs `body(begin, end)` over contiguous chunks of [0, n). Chunks are
 * disjoint, so bodies that only write to their own indices produce results
 * independent of the thread count.
 */
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                  std::size_t threads = 0);

} // namespace embedfuse

#endif
