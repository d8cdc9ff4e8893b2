#pragma once

#include <cstddef>
#include <functional>

namespace reluflow {

/// Worker cap: RELUFLOW_THREADS when set to a positive integer, otherwise
/// the hardware concurrency (at least 1).
std::size_t worker_count();

/// Runs body(0..n-1) on up to worker_count() threads. Each index is
/// visited once; the first exception thrown is rethrown after all workers
/// stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace reluflow
