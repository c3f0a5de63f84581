#pragma once

#include <cstddef>
#include <functional>

namespace qbm {

/// Worker threads used by parallel_for; 0 selects the hardware concurrency.
void set_thread_count(std::size_t threads);
std::size_t thread_count();

/// Calls body(i) for i in [0, n) across the configured threads. Results are
/// independent of the thread count as long as body(i) depends only on i. The
/// first exception thrown by any call is rethrown after all workers stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace qbm
