#pragma once

#include <omp.h>

#include <cstddef>

namespace farms::detail {

// Outer loops (layers, trials) take the thread team; inner loops then run
// serially instead of oversubscribing.
inline bool run_parallel(std::size_t iterations) { return iterations > 1 && !omp_in_parallel(); }

} // namespace farms::detail
