#pragma once

#include <cstddef>
#include <exception>
#include <functional>

namespace adaptis {

/// Cap on worker threads used by replication loops. 0 means hardware concurrency.
/// Results never depend on this value: every index owns its RNG stream and
/// reductions run in index order after the parallel section.
void set_max_threads(unsigned n) noexcept;
unsigned max_threads() noexcept;

/// Calls body(i) for i in [0, n), split into contiguous chunks across workers.
/// The first exception thrown by any worker is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace adaptis
