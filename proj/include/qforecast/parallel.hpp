#pragma once

#include <cstddef>
#include <functional>

namespace qf {

// Resolves a requested worker count: values < 1 read QFORECAST_THREADS, then
// fall back to 1.
int resolve_threads(int requested);

// Calls fn(i) for i in [0, n) on up to `threads` workers. Each index runs
// exactly once; the first exception is rethrown after all workers join.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace qf
