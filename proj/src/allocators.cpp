#include "farms/allocators.hpp"

#include "farms/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace farms {

std::string to_string(alpha_metric m) { return m == alpha_metric::baseline ? "baseline" : "farms"; }

alpha_metric parse_metric(const std::string& s) {
    if (s == "baseline") return alpha_metric::baseline;
    if (s == "farms") return alpha_metric::farms;
    throw config_error("unknown metric '" + s + "' (expected baseline or farms)");
}

double metric_alpha(const layer_report& r, alpha_metric m) {
    return m == alpha_metric::baseline ? r.baseline_alpha : r.farms_alpha;
}

std::vector<layer_report> select_layers(std::vector<layer_report> reports, const ls_config& ls, alpha_metric metric) {
    for (auto& r : reports) {
        r.excluded = false;
        r.reason.clear();
    }
    if (!ls.enabled) return reports;

    auto flag = [](layer_report& r, const std::string& why) {
        r.excluded = true;
        r.reason = r.reason.empty() ? why : r.reason + "; " + why;
    };
    for (std::size_t i = 0; i < reports.size(); ++i) {
        auto& r = reports[i];
        if (ls.exclude_first_last && (i == 0 || i + 1 == reports.size())) {
            flag(r, i == 0 ? "first layer" : "last layer");
        }
        const auto [rows, cols] = r.matrix_dims();
        if (std::min(rows, cols) < ls.min_esd_size) flag(r, "few eigenvalues");
        if (metric == alpha_metric::baseline && std::min(rows, cols) > 0) {
            const double aspect = static_cast<double>(std::max(rows, cols)) / static_cast<double>(std::min(rows, cols));
            if (aspect > ls.max_aspect_ratio) flag(r, "tall-and-skinny");
        }
    }
    return reports;
}

void lr_schedule_config::validate() const {
    if (!(eta > 0.0)) throw config_error("learning rate eta must be > 0");
    if (!(s1 > 0.0) || !(s1 <= s2)) throw config_error("scaling bounds must satisfy 0 < s1 <= s2");
    if (mapping == lr_mapping::sigmoid && !(temperature > 0.0)) {
        throw config_error("sigmoid temperature must be > 0");
    }
}

void sparsity_config::validate() const {
    if (!(target >= 0.0 && target < 1.0)) throw config_error("sparsity target must lie in [0, 1)");
    if (!(tau >= 0.0)) throw config_error("sparsity tau must be >= 0");
    if (!(clamp_lo >= 0.0 && clamp_lo <= clamp_hi && clamp_hi < 1.0)) {
        throw config_error("sparsity clamp must satisfy 0 <= lo <= hi < 1");
    }
}

namespace {

allocation_entry entry_of(const layer_report& r) {
    return {r.name, r.baseline_alpha, r.farms_alpha, 0.0, r.excluded, r.reason};
}

// Position of alpha in [0, 1] across the given range; all-equal maps to 1/2.
double unit_position(double alpha, double lo, double hi) {
    if (!(hi > lo)) return 0.5;
    return (alpha - lo) / (hi - lo);
}

} // namespace

allocation_result assign_learning_rates(const std::vector<layer_report>& reports, const lr_schedule_config& cfg,
                                        alpha_metric metric) {
    cfg.validate();
    std::vector<double> active;
    for (const auto& r : reports) {
        if (!r.excluded) active.push_back(metric_alpha(r, metric));
    }
    if (active.empty()) throw allocation_error("no non-excluded layers to schedule");

    const auto [lo_it, hi_it] = std::minmax_element(active.begin(), active.end());
    const double lo = *lo_it, hi = *hi_it;
    const double n = static_cast<double>(active.size());
    const double mean = std::accumulate(active.begin(), active.end(), 0.0) / n;
    double var = 0.0;
    for (double a : active) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / n);

    allocation_result out;
    out.metric = metric;
    out.constraints.kind = "learning_rate";
    out.constraints.target = cfg.eta;
    out.constraints.lower = cfg.s1 * cfg.eta;
    out.constraints.upper = cfg.s2 * cfg.eta;

    double sum = 0.0;
    for (const auto& r : reports) {
        auto e = entry_of(r);
        if (r.excluded) {
            e.value = cfg.eta;
        } else {
            const double a = metric_alpha(r, metric);
            double pos = 0.5;
            if (cfg.mapping == lr_mapping::linear_minmax) {
                pos = unit_position(a, lo, hi);
            } else if (sd > 0.0) {
                pos = 1.0 / (1.0 + std::exp(-((a - mean) / sd) / cfg.temperature));
            }
            // Larger alpha means a less trained layer: push it toward s2.
            e.value = cfg.eta * ((1.0 - pos) * cfg.s1 + pos * cfg.s2);
            e.value = std::clamp(e.value, out.constraints.lower, out.constraints.upper);
        }
        sum += e.value;
        out.per_layer.push_back(std::move(e));
    }
    out.constraints.achieved = sum / static_cast<double>(reports.size());
    return out;
}

sparsity_solution allocate_sparsity(const std::vector<double>& alphas, const std::vector<double>& weights,
                                    const sparsity_config& cfg) {
    cfg.validate();
    if (alphas.empty()) throw allocation_error("no layers to allocate sparsity for");
    if (weights.size() != alphas.size()) throw allocation_error("weights and alphas differ in length");
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(total > 0.0)) throw allocation_error("total weight must be positive");

    const auto [lo_it, hi_it] = std::minmax_element(alphas.begin(), alphas.end());
    const double lo = *lo_it, hi = *hi_it;

    sparsity_solution sol;
    sol.values.resize(alphas.size());
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        // Lighter tail (larger alpha) is pruned harder.
        sol.values[i] = hi > lo ? (cfg.target - cfg.tau) + 2.0 * cfg.tau * (alphas[i] - lo) / (hi - lo) : cfg.target;
    }

    auto weighted_mean = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < sol.values.size(); ++i) s += weights[i] * sol.values[i];
        return s / total;
    };
    auto clamp_all = [&] {
        for (auto& v : sol.values) v = std::clamp(v, cfg.clamp_lo, cfg.clamp_hi);
    };

    // Additive correction spread uniformly over the layers that can still
    // move in the required direction, then clamp; repeat while needed.
    clamp_all();
    double mean = weighted_mean();
    constexpr double tol = 1e-12;
    while (std::abs(mean - cfg.target) > tol && sol.iterations < cfg.max_iterations) {
        const double deficit = cfg.target - mean;
        double free_weight = 0.0;
        for (std::size_t i = 0; i < sol.values.size(); ++i) {
            const bool can_move = deficit > 0.0 ? sol.values[i] < cfg.clamp_hi : sol.values[i] > cfg.clamp_lo;
            if (can_move) free_weight += weights[i];
        }
        if (!(free_weight > 0.0)) break;
        const double shift = deficit * total / free_weight;
        for (std::size_t i = 0; i < sol.values.size(); ++i) {
            const bool can_move = deficit > 0.0 ? sol.values[i] < cfg.clamp_hi : sol.values[i] > cfg.clamp_lo;
            if (can_move) sol.values[i] += shift;
        }
        clamp_all();
        mean = weighted_mean();
        ++sol.iterations;
    }
    sol.achieved = mean;
    sol.feasible = std::abs(mean - cfg.target) <= 1e-9;
    return sol;
}

allocation_result assign_sparsities(const std::vector<layer_report>& reports, const sparsity_config& cfg,
                                    alpha_metric metric) {
    std::vector<double> alphas, weights;
    for (const auto& r : reports) {
        alphas.push_back(metric_alpha(r, metric));
        weights.push_back(cfg.weight_by_params ? static_cast<double>(r.parameter_count()) : 1.0);
    }
    const auto sol = allocate_sparsity(alphas, weights, cfg);

    allocation_result out;
    out.metric = metric;
    out.constraints.kind = "sparsity";
    out.constraints.target = cfg.target;
    out.constraints.achieved = sol.achieved;
    out.constraints.lower = cfg.clamp_lo;
    out.constraints.upper = cfg.clamp_hi;
    out.constraints.iterations = sol.iterations;
    out.constraints.feasible = sol.feasible;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        auto e = entry_of(reports[i]);
        e.value = sol.values[i];
        out.per_layer.push_back(std::move(e));
    }
    if (!sol.feasible) {
        std::ostringstream os;
        os.precision(12);
        os << "sparsity target " << cfg.target << " infeasible under clamp [" << cfg.clamp_lo << ", " << cfg.clamp_hi
           << "]; achieved weighted mean " << sol.achieved;
        throw infeasible_allocation(os.str(), std::move(out));
    }
    return out;
}

} // namespace farms
