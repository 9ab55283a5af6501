#pragma once

#include <cstddef>
#include <functional>

namespace splinesel {

/// Name of the environment variable that sets the worker count.
inline constexpr const char* kWorkersEnv = "SPLINESEL_WORKERS";

/// Worker count from SPLINESEL_WORKERS, else the hardware concurrency (at least 1).
unsigned worker_count();

/// Run body(i) for i in [0, count) on `workers` threads.  Indices are handed
/// out dynamically; the first exception thrown by any body is rethrown after
/// all threads finish.  workers == 0 means worker_count().
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body, unsigned workers = 0);

}  // namespace splinesel
