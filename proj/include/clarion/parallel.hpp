#pragma once

#include <cstddef>
#include <functional>

namespace clarion {

/// Runs `fn(i)` for i in [0, n) on up to `jobs` threads. When calls throw,
/// the exception from the lowest index is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t jobs, std::function<void(std::size_t)> const &fn);

} // namespace clarion
