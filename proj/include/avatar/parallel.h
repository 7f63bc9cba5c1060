#pragma once

#include <functional>

namespace avatar {

// Runs fn(i) for every i in [0, n). Work is assigned by static stride, so
// callers that write results into per-index slots get output independent of
// thread scheduling. workers <= 1 runs inline.
void parallel_for(long n, int workers, const std::function<void(long)>& fn);

}  // namespace avatar
