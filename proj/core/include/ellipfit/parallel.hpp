#pragma once

#include <cstdint>
#include <functional>

namespace ellip {

// Maps the user-facing thread count to an actual one: values <= 0 mean "use
// the hardware concurrency".
int resolve_threads(int requested);

// Runs body(i) for i in [0, count) on the given number of threads, handing
// out indices through a shared atomic counter.  Results must be written to
// per-index slots by the body; aggregation stays with the caller, which is
// what makes experiment output independent of the thread count.  The first
// exception thrown by any body is rethrown after all workers join.
void parallel_for(std::int64_t count, int threads,
                  const std::function<void(std::int64_t)>& body);

}  // namespace ellip
