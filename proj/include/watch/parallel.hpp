#pragma once

#include <cstdint>
#include <functional>

namespace watch {

/// Caps the number of worker threads used by parallel_for.  0 restores
/// the hardware default.  Thread count never changes results: tasks
/// write to disjoint slots and reductions run in task order.
void set_max_threads(int n);
int max_threads();

/// Runs fn(i) for i in [0, n).  Tasks must be independent.  Nested
/// calls (fn itself calling parallel_for) run sequentially.  The first
/// exception thrown by a task is rethrown on the calling thread after
/// all workers finish.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn);

}  // namespace watch
