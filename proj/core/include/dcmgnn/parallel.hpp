#pragma once

#include <cstddef>
#include <functional>

namespace dcmgnn {

// Number of worker threads used by row-parallel kernels. Defaults to 1.
void set_num_workers(int workers);
int num_workers();

// Splits [0, n) into contiguous chunks, one per worker. Each index is
// processed by exactly one worker, so results never depend on the worker count
// as long as `fn` writes only to rows it owns.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace dcmgnn
