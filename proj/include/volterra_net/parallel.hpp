#pragma once

#include <cstddef>
#include <functional>

namespace vnet {

/// Process-wide cap on worker threads; 0 restores the hardware default.
void set_thread_limit(std::size_t n);
std::size_t thread_limit();

/// Runs body(i) for i in [0, n) on up to thread_limit() workers. Work items must
/// write to disjoint outputs; callers reduce results in index order afterwards.
/// The exception from the lowest failing index is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace vnet
