#pragma once

#include <cstddef>
#include <functional>

namespace fixinv {

/// Worker count: FIXINV_THREADS when set and positive, otherwise the
/// hardware concurrency.
unsigned worker_count();

/// Calls fn(i) for i in [0, n) across worker_count() threads. Each index runs
/// exactly once; the first exception thrown is rethrown after all workers
/// join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace fixinv
