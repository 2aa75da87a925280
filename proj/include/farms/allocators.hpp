#pragma once

#include "farms/error.hpp"
#include "farms/sampler.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace farms {

enum class alpha_metric { baseline, farms };

std::string to_string(alpha_metric m);
alpha_metric parse_metric(const std::string& s);

/// Layer selection (LS) for layer-wise learning rates.
struct ls_config {
    bool enabled = true;
    bool exclude_first_last = true;
    std::size_t min_esd_size = 32;
    // Only consulted when the allocation runs on baseline alphas.
    double max_aspect_ratio = 5.0;
};

/// Returns a copy of `reports` with exclusion flags and reasons set. Flags
/// from a previous pass are cleared first.
std::vector<layer_report> select_layers(std::vector<layer_report> reports, const ls_config& ls,
                                        alpha_metric metric = alpha_metric::farms);

enum class lr_mapping { linear_minmax, sigmoid };

struct lr_schedule_config {
    double eta = 0.1;
    double s1 = 0.5;
    double s2 = 1.5;
    lr_mapping mapping = lr_mapping::linear_minmax;
    double temperature = 1.0; // sigmoid only
    ls_config selection;

    void validate() const;
};

struct sparsity_config {
    double target = 0.7;
    double tau = 0.1;
    bool weight_by_params = true;
    double clamp_lo = 0.0;
    double clamp_hi = 0.99;
    std::size_t max_iterations = 8;

    void validate() const;
};

struct allocation_entry {
    std::string name;
    double alpha_baseline = 0.0;
    double alpha_farms = 0.0;
    double value = 0.0;
    bool excluded = false;
    std::string reason;
};

struct constraint_report {
    std::string kind; // "learning_rate" or "sparsity"
    double target = 0.0;
    double achieved = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    std::size_t iterations = 0;
    bool feasible = true;
};

struct allocation_result {
    alpha_metric metric = alpha_metric::farms;
    std::vector<allocation_entry> per_layer;
    constraint_report constraints;
};

double metric_alpha(const layer_report& r, alpha_metric m);

/// Larger alpha (less trained) gets a larger rate. Excluded layers keep eta.
allocation_result assign_learning_rates(const std::vector<layer_report>& reports, const lr_schedule_config& cfg,
                                        alpha_metric metric);

/// Carries the best-effort allocation alongside the error.
class infeasible_allocation : public allocation_error {
public:
    infeasible_allocation(const std::string& what, allocation_result r)
        : allocation_error(what), result_(std::move(r)) {}
    const allocation_result& result() const noexcept { return result_; }

private:
    allocation_result result_;
};

/// Larger alpha (lighter tail) gets a larger pruning ratio, then the
/// parameter-weighted mean is corrected back to the target.
allocation_result assign_sparsities(const std::vector<layer_report>& reports, const sparsity_config& cfg,
                                    alpha_metric metric);

/// Core of assign_sparsities on raw numbers; `weights` are parameter counts
/// (or all ones).
struct sparsity_solution {
    std::vector<double> values;
    double achieved = 0.0;
    std::size_t iterations = 0;
    bool feasible = true;
};
sparsity_solution allocate_sparsity(const std::vector<double>& alphas, const std::vector<double>& weights,
                                    const sparsity_config& cfg);

} // namespace farms
