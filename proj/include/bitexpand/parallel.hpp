#pragma once

#include <cstddef>
#include <functional>

namespace bitexpand {

/// Worker count used by parallel_for. Defaults to 1.
void set_num_threads(int n);
int num_threads();

/// Runs fn(i) for i in [0, count). Each index is handled by exactly one
/// worker, so results are independent of the thread count as long as fn
/// writes only to storage owned by its index.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);
/// Same with an explicit worker count.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace bitexpand
