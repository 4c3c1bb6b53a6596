#pragma once

#include <cstddef>
#include <functional>

namespace interlab {

// Runs fn(0..count-1) across `jobs` worker threads. Each index writes its
// own result slot, so the output is identical for any worker count; only
// wall time changes. jobs <= 1 runs inline. The first exception thrown by
// any worker is rethrown after the pool joins.
void parallel_for(std::size_t count, int jobs,
                  const std::function<void(std::size_t)>& fn);

}  // namespace interlab
