#pragma once

#include <cstddef>
#include <functional>

namespace brushwork {

/// Worker count: `BRUSHWORK_THREADS` when set to a positive integer, otherwise
/// the number of available cores.
std::size_t worker_count();

/// Runs `body(i)` for every i in [0, n). Indices are split into contiguous
/// blocks, one per worker; callers write results by index so the outcome does
/// not depend on the schedule. The first exception thrown by any worker is
/// rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace brushwork
