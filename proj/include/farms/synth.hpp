#pragma once

#include "farms/rng.hpp"
#include "farms/sampler.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace farms {

enum class variance_mode { unit, he_fan_in };

struct gaussian_spec {
    std::size_t rows = 1;
    std::size_t cols = 1;
    variance_mode variance = variance_mode::unit;
    std::uint64_t seed = 0;
};

/// m x n i.i.d. normal; he_fan_in uses variance 2 / n with n = cols.
Eigen::MatrixXd gen_gaussian(const gaussian_spec& spec);

struct shape2 {
    std::size_t rows = 0;
    std::size_t cols = 0;
};

struct bias_row {
    shape2 shape;
    std::size_t trials = 0;
    std::size_t failed = 0;
    double baseline_mean = 0.0, baseline_std = 0.0;
    double farms_mean = 0.0, farms_std = 0.0;
    std::vector<double> baseline_alphas;
    std::vector<double> farms_alphas;
};

struct bias_sweep_result {
    std::vector<bias_row> rows;
    double baseline_range = 0.0; // max - min of per-shape means
    double farms_range = 0.0;
    std::vector<std::string> errors;
};

bias_sweep_result bias_sweep(const std::vector<shape2>& shapes, std::size_t trials, const subsample_config& cfg,
                             std::uint64_t seed);

struct hill_validation_result {
    double mean = 0.0;
    double stddev = 0.0;
    std::vector<double> estimates;
};

/// Inverse-CDF samples with density ~ x^-alpha on [1, inf), then Hill.
std::vector<double> pareto_samples(double alpha, std::size_t n, const counter_rng& rng);
hill_validation_result hill_validation(double true_alpha, std::size_t n_samples, std::size_t trials,
                                       std::uint64_t seed, const hill_config& hill = {});

double pearson_correlation(std::span<const double> xs, std::span<const double> ys);
double spearman_correlation(std::span<const double> xs, std::span<const double> ys);

double mean_of(std::span<const double> v);
double population_std(std::span<const double> v);

// Teacher-student toy: y = g(<w*, x>), student f(x) = a^T g(W x) / sqrt(p)
// with a frozen random-sign vector; only W (p x d) is trained by SGD.

enum class activation { relu, tanh };

struct toy_config {
    std::size_t input_dim = 500;
    std::vector<std::size_t> widths{250, 500, 1000, 2000};
    std::size_t seeds = 3;
    std::uint64_t seed = 0;
    activation act = activation::relu;
    std::size_t steps = 60;
    std::size_t batch_size = 1000;
    double learning_rate = 1.0;
    std::size_t eval_stride = 6;
    // Optional rank-one w* component added at init (strength in operator norm).
    double init_spike = 0.0;
    subsample_config farms;

    void validate() const;
};

struct toy_checkpoint {
    std::size_t step = 0;
    double alignment = 0.0;
    double baseline_alpha = 0.0;
    double farms_alpha = 0.0;
};

struct alignment_series {
    std::size_t width = 0;
    std::size_t seed_index = 0;
    std::vector<toy_checkpoint> checkpoints;
    toy_checkpoint best;
    double final_loss = 0.0;
};

/// |<v1(W), w*>| with v1 the top right-singular vector of W.
double alignment(const Eigen::Ref<const Eigen::MatrixXd>& w, const Eigen::Ref<const Eigen::VectorXd>& w_star);

/// One student of width p. Alphas are computed at every checkpoint when
/// `all_alphas` is set, otherwise only at the best one.
alignment_series teacher_student_run(const toy_config& cfg, std::size_t width, std::size_t seed_index,
                                     bool all_alphas = false);

struct width_summary {
    std::size_t width = 0;
    double alignment = 0.0; // mean over seeds of best-checkpoint values
    double baseline_alpha = 0.0;
    double farms_alpha = 0.0;
};

struct correlation_pair {
    double baseline = 0.0;
    double farms = 0.0;
};

struct toy_sweep_result {
    std::vector<alignment_series> runs; // width-major, then seed
    std::vector<width_summary> per_width;
    correlation_pair pearson_width_means;
    correlation_pair pearson_pooled;
    correlation_pair spearman_width_means;
};

toy_sweep_result toy_sweep(const toy_config& cfg);

} // namespace farms
