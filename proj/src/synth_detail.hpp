#pragma once

#include "farms/synth.hpp"

namespace farms::detail {

std::uint64_t trial_seed(std::uint64_t seed, std::size_t shape_index, std::size_t trial);
void finish_sweep(bias_sweep_result& r);

} // namespace farms::detail
