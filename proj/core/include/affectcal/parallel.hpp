#pragma once

#include <cstddef>
#include <functional>

namespace affectcal {

// Worker count: hardware concurrency, capped by AFFECTCAL_THREADS when set.
std::size_t worker_count();

// Runs fn(i) for i in [0, n) across worker_count() threads. Each index is
// handled exactly once; callers write results into per-index slots so output
// order never depends on scheduling. The exception from the lowest failing
// index is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace affectcal
