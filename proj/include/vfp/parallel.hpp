#pragma once

#include <cstddef>
#include <functional>

namespace vfp {

/// Global worker cap used by parallel_for. 0 means hardware concurrency.
void set_thread_count(int n);
int thread_count();

/// Resolved number of workers for a job of `n` items.
int effective_threads(std::size_t n);

/// Runs fn(begin, end) over contiguous chunks of [0, n), possibly on
/// several threads. Chunk boundaries depend only on n and the worker
/// count; callers must keep per-index outputs independent so results do
/// not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace vfp
