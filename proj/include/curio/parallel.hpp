#pragma once

#include <cstddef>
#include <functional>

namespace curio {

// Runs body(i) for i in [0, count) on up to `parallelism` threads. Work is
// claimed in index order; the first exception thrown is rethrown after all
// workers finish.
void parallel_for(std::size_t count, int parallelism, const std::function<void(std::size_t)>& body);

}  // namespace curio
