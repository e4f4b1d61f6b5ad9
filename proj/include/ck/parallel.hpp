#pragma once

// Per-chart parallel loops.  Each index writes only its own output slot, so
// results do not depend on the thread count.  CK_THREADS sets the pool size
// (default: hardware concurrency).

#include <cstddef>
#include <functional>

namespace ck {

int thread_count();
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace ck
