#pragma once

#include <cstddef>
#include <functional>

namespace so2frames {

/// Worker count from SO2FRAMES_THREADS (default 1, clamped to [1, 64]).
int thread_count();

/// Runs fn(k) for k in [0, n). Iterations must write disjoint outputs; any
/// reduction over them is left to the caller so its order stays fixed.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace so2frames
