#include "farms/synth.hpp"

#include "farms/error.hpp"
#include "parallel.hpp"
#include "synth_detail.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace farms {

double mean_of(std::span<const double> v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double population_std(std::span<const double> v) {
    if (v.empty()) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

Eigen::MatrixXd gen_gaussian(const gaussian_spec& spec) {
    if (spec.rows < 1 || spec.cols < 1) throw config_error("gen_gaussian: shape must be at least 1x1");
    const counter_rng rng(spec.seed);
    const double scale = spec.variance == variance_mode::he_fan_in ? std::sqrt(2.0 / static_cast<double>(spec.cols)) : 1.0;
    const auto rows = static_cast<Eigen::Index>(spec.rows);
    const auto cols = static_cast<Eigen::Index>(spec.cols);
    Eigen::MatrixXd out(rows, cols);
#pragma omp parallel for schedule(static) if (detail::run_parallel(spec.rows * spec.cols >= 65536 ? spec.rows : 1))
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            out(i, j) = scale * rng.normal(static_cast<std::uint64_t>(i) * spec.cols + static_cast<std::uint64_t>(j));
        }
    }
    return out;
}

namespace detail {

std::uint64_t trial_seed(std::uint64_t seed, std::size_t shape_index, std::size_t trial) {
    return counter_rng(seed).derive(shape_index, trial).key();
}

void finish_sweep(bias_sweep_result& r) {
    double bmin = 0, bmax = 0, fmin = 0, fmax = 0;
    bool first = true;
    for (auto& row : r.rows) {
        row.baseline_mean = mean_of(row.baseline_alphas);
        row.baseline_std = population_std(row.baseline_alphas);
        row.farms_mean = mean_of(row.farms_alphas);
        row.farms_std = population_std(row.farms_alphas);
        if (row.baseline_alphas.empty()) continue;
        if (first) {
            bmin = bmax = row.baseline_mean;
            fmin = fmax = row.farms_mean;
            first = false;
        }
        bmin = std::min(bmin, row.baseline_mean);
        bmax = std::max(bmax, row.baseline_mean);
        fmin = std::min(fmin, row.farms_mean);
        fmax = std::max(fmax, row.farms_mean);
    }
    r.baseline_range = bmax - bmin;
    r.farms_range = fmax - fmin;
}

} // namespace detail

bias_sweep_result bias_sweep(const std::vector<shape2>& shapes, std::size_t trials, const subsample_config& cfg,
                             std::uint64_t seed) {
    if (trials < 1) throw config_error("bias_sweep: trials must be >= 1");
    cfg.validate();
    const std::size_t total = shapes.size() * trials;
    struct slot {
        double baseline = 0.0, farms = 0.0;
        std::string error;
    };
    std::vector<slot> slots(total);
#pragma omp parallel for schedule(dynamic) if (detail::run_parallel(total))
    for (std::size_t idx = 0; idx < total; ++idx) {
        const std::size_t s = idx / trials;
        const std::size_t t = idx % trials;
        try {
            const auto w = gen_gaussian(
                {shapes[s].rows, shapes[s].cols, variance_mode::he_fan_in, detail::trial_seed(seed, s, t)});
            slots[idx].baseline = hill_alpha(esd_of_matrix(w), cfg.hill);
            slots[idx].farms = farms_alpha_linear(w, cfg);
        } catch (const std::exception& ex) {
            slots[idx].error = ex.what();
        }
    }

    bias_sweep_result out;
    for (std::size_t s = 0; s < shapes.size(); ++s) {
        bias_row row;
        row.shape = shapes[s];
        row.trials = trials;
        for (std::size_t t = 0; t < trials; ++t) {
            const auto& sl = slots[s * trials + t];
            if (!sl.error.empty()) {
                ++row.failed;
                out.errors.push_back(std::to_string(shapes[s].rows) + "x" + std::to_string(shapes[s].cols) +
                                     " trial " + std::to_string(t) + ": " + sl.error);
                continue;
            }
            row.baseline_alphas.push_back(sl.baseline);
            row.farms_alphas.push_back(sl.farms);
        }
        out.rows.push_back(std::move(row));
    }
    detail::finish_sweep(out);
    return out;
}

std::vector<double> pareto_samples(double alpha, std::size_t n, const counter_rng& rng) {
    if (!(alpha > 1.0)) throw config_error("pareto_samples: alpha must be > 1");
    // Survival function x^-(alpha - 1) on [1, inf).
    const double inv = -1.0 / (alpha - 1.0);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = std::pow(rng.uniform(i), inv);
    return out;
}

hill_validation_result hill_validation(double true_alpha, std::size_t n_samples, std::size_t trials,
                                       std::uint64_t seed, const hill_config& hill) {
    if (!(true_alpha > 1.0)) throw config_error("hill_validation: true alpha must be > 1");
    if (trials < 1 || n_samples < 2) throw config_error("hill_validation: need trials >= 1 and n >= 2");
    hill_validation_result out;
    out.estimates.resize(trials);
    const counter_rng root(seed);
#pragma omp parallel for schedule(dynamic) if (detail::run_parallel(trials))
    for (std::size_t t = 0; t < trials; ++t) {
        auto xs = pareto_samples(true_alpha, n_samples, root.derive(t));
        std::sort(xs.begin(), xs.end());
        out.estimates[t] = hill_alpha_sorted(xs, hill);
    }
    out.mean = mean_of(out.estimates);
    out.stddev = population_std(out.estimates);
    return out;
}

double pearson_correlation(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw config_error("pearson: length mismatch");
    if (xs.size() < 3) throw config_error("pearson: need at least 3 points");
    const double mx = mean_of(xs), my = mean_of(ys);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) throw config_error("pearson: degenerate variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

std::vector<double> ranks(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

} // namespace

double spearman_correlation(std::span<const double> xs, std::span<const double> ys) {
    const auto rx = ranks(xs);
    const auto ry = ranks(ys);
    return pearson_correlation(rx, ry);
}

} // namespace farms
