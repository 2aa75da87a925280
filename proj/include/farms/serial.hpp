#pragma once

// Single-threaded reference versions of the OpenMP kernels. They are kept
// deliberately plain and are used by the tests to check that the parallel
// paths produce bit-identical results for every thread count.

#include "farms/sampler.hpp"
#include "farms/synth.hpp"

namespace farms::serial {

Eigen::MatrixXd gen_gaussian(const gaussian_spec& spec);
esd farms_esd_linear(const Eigen::Ref<const Eigen::MatrixXd>& m, const subsample_config& cfg);
conv_result farms_conv(const conv_view& t, const subsample_config& cfg);
bias_sweep_result bias_sweep(const std::vector<shape2>& shapes, std::size_t trials, const subsample_config& cfg,
                             std::uint64_t seed);

} // namespace farms::serial
