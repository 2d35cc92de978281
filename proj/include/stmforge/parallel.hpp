#pragma once

#include <cstddef>
#include <functional>

namespace stmforge {

// Global worker count for batch/image level parallelism. 1 = fully serial.
void set_threads(int n);
int threads();

// Runs fn(i) for i in [0, n). Work is split into fixed-size chunks so any
// floating-point reductions done per chunk can be combined in index order,
// making results independent of the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace stmforge
