#pragma once

// Deterministic parallel map: work items are dispatched to a fixed-size
// thread pool and results land in index-addressed slots, so the output is
// independent of scheduling order.

#include <cstddef>
#include <functional>

namespace rotortrap {

// Number of worker threads to use: explicit request > ROTORTRAP_JOBS
// environment variable > hardware concurrency (at least 1).
std::size_t resolve_jobs(std::size_t requested);

// Runs fn(i) for i in [0, n) across `jobs` threads.  fn must be thread-safe;
// exceptions are captured and the first one (lowest index) is rethrown after
// all workers finish.
void parallel_for(std::size_t n, std::size_t jobs,
                  const std::function<void(std::size_t)>& fn);

} // namespace rotortrap
