#pragma once

#include <cstddef>
#include <functional>

namespace armlab {

/// Worker count: ARM_LAB_THREADS if set (at most 256), otherwise hardware
/// concurrency.
std::size_t worker_threads();

/// Runs body(i) for i in [0, n). Iterations must write disjoint memory; the
/// result is then independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace armlab
