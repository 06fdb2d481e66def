#pragma once

#include <cstddef>
#include <functional>

namespace frustra {

/// Worker count: FRUSTRA_THREADS if set (>= 1), else hardware concurrency.
std::size_t thread_count();

/// Runs fn(i) for i in [0, count) on up to thread_count() threads. Work items
/// are claimed dynamically; fn must only touch state owned by item i. The
/// first exception thrown by any item is rethrown after all workers join.
/// Calls made from inside a worker run serially.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace frustra
