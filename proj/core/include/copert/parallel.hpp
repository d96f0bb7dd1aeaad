#pragma once

#include <cstddef>
#include <functional>

namespace copert {

// Worker count: hardware concurrency, capped by COPERT_THREADS when set.
int worker_count();

// Runs fn(i) for i in [0, n). Results must be written by index so the outcome does not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace copert
