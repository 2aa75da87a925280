#include "farms/serial.hpp"

#include "farms/error.hpp"
#include "synth_detail.hpp"

#include <cmath>
#include <numeric>

namespace farms::serial {

Eigen::MatrixXd gen_gaussian(const gaussian_spec& spec) {
    const counter_rng rng(spec.seed);
    const double scale = spec.variance == variance_mode::he_fan_in ? std::sqrt(2.0 / static_cast<double>(spec.cols)) : 1.0;
    Eigen::MatrixXd out(static_cast<Eigen::Index>(spec.rows), static_cast<Eigen::Index>(spec.cols));
    std::uint64_t counter = 0;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) = scale * rng.normal(counter++);
    }
    return out;
}

esd farms_esd_linear(const Eigen::Ref<const Eigen::MatrixXd>& m, const subsample_config& cfg) {
    Eigen::MatrixXd oriented = m;
    if (oriented.rows() < oriented.cols()) oriented.transposeInPlace();
    const auto plan = plan_subsamples(static_cast<std::size_t>(oriented.rows()),
                                      static_cast<std::size_t>(oriented.cols()), cfg);
    std::vector<esd> parts;
    for (const auto& o : plan.offsets) {
        const Eigen::MatrixXd block =
            oriented.block(static_cast<Eigen::Index>(o.row), static_cast<Eigen::Index>(o.col),
                           static_cast<Eigen::Index>(plan.window_rows), static_cast<Eigen::Index>(plan.window_cols));
        parts.push_back(esd_of_matrix(block));
    }
    return concatenate(std::move(parts));
}

conv_result farms_conv(const conv_view& t, const subsample_config& cfg) {
    std::vector<Eigen::MatrixXd> slices;
    for (std::size_t s = 0; s < t.slices(); ++s) {
        Eigen::MatrixXd m = t.slice(s);
        if (m.rows() < m.cols()) m.transposeInPlace();
        slices.push_back(std::move(m));
    }
    const auto rows = static_cast<std::size_t>(slices.front().rows());
    const auto cols = static_cast<std::size_t>(slices.front().cols());
    auto c = cfg;
    c.clamp_window = true;
    auto plan = plan_subsamples(rows, cols, c);
    if (plan.clamped) {
        plan.window_rows = rows;
        plan.window_cols = cols;
        plan.offsets = {offset{0, 0}};
    }

    conv_result out;
    out.block_count = plan.offsets.size();
    out.submatrix_count = plan.offsets.size() * slices.size();
    std::vector<esd> everything;
    for (const auto& o : plan.offsets) {
        std::vector<esd> group;
        for (const auto& s : slices) {
            group.push_back(esd_of_matrix(s.block(static_cast<Eigen::Index>(o.row), static_cast<Eigen::Index>(o.col),
                                                  static_cast<Eigen::Index>(plan.window_rows),
                                                  static_cast<Eigen::Index>(plan.window_cols))));
        }
        if (cfg.aggregation == conv_aggregation::concatenate_all) {
            for (auto& g : group) everything.push_back(std::move(g));
        } else {
            const esd merged = concatenate(std::move(group));
            out.esd_size += merged.size();
            out.block_alphas.push_back(hill_alpha(merged, cfg.hill));
        }
    }
    if (cfg.aggregation == conv_aggregation::concatenate_all) {
        const esd all = concatenate(std::move(everything));
        out.esd_size = all.size();
        out.alpha = hill_alpha(all, cfg.hill);
    } else {
        out.alpha = std::accumulate(out.block_alphas.begin(), out.block_alphas.end(), 0.0) /
                    static_cast<double>(out.block_alphas.size());
    }
    return out;
}

bias_sweep_result bias_sweep(const std::vector<shape2>& shapes, std::size_t trials, const subsample_config& cfg,
                             std::uint64_t seed) {
    bias_sweep_result out;
    for (std::size_t s = 0; s < shapes.size(); ++s) {
        bias_row row;
        row.shape = shapes[s];
        row.trials = trials;
        for (std::size_t t = 0; t < trials; ++t) {
            try {
                const auto w = serial::gen_gaussian(
                    {shapes[s].rows, shapes[s].cols, variance_mode::he_fan_in, detail::trial_seed(seed, s, t)});
                const double b = hill_alpha(esd_of_matrix(w), cfg.hill);
                const double f = hill_alpha(serial::farms_esd_linear(w, cfg), cfg.hill);
                row.baseline_alphas.push_back(b);
                row.farms_alphas.push_back(f);
            } catch (const std::exception& ex) {
                ++row.failed;
                out.errors.push_back(std::to_string(shapes[s].rows) + "x" + std::to_string(shapes[s].cols) +
                                     " trial " + std::to_string(t) + ": " + ex.what());
            }
        }
        out.rows.push_back(std::move(row));
    }
    detail::finish_sweep(out);
    return out;
}

} // namespace farms::serial
