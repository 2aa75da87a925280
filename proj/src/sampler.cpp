#include "farms/sampler.hpp"

#include "farms/error.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

namespace farms {

void subsample_config::validate() const {
    if (!(q_ratio > 0.0) || !std::isfinite(q_ratio)) throw config_error("subsample: Q must be > 0");
    if (window == window_mode::explicit_size) {
        if (window_rows < 1 || window_cols < 1) throw config_error("subsample: explicit window must be >= 1x1");
        const double off = std::abs(static_cast<double>(window_rows) - q_ratio * static_cast<double>(window_cols));
        if (off > 1.0) {
            throw config_error("subsample: explicit window " + std::to_string(window_rows) + "x" +
                               std::to_string(window_cols) + " does not have aspect ratio Q");
        }
    }
    if (steps == step_mode::grid && (row_steps < 1 || col_steps < 1)) {
        throw config_error("subsample: grid steps must be >= 1");
    }
    hill.validate();
}

std::vector<std::size_t> axis_offsets(std::size_t dim, std::size_t window, std::size_t count) {
    if (window > dim) throw config_error("axis_offsets: window larger than dimension");
    const std::size_t span = dim - window;
    if (count <= 1 || span == 0) return {0};
    std::vector<std::size_t> out;
    out.reserve(count);
    const std::size_t denom = count - 1;
    for (std::size_t i = 0; i < count; ++i) {
        // round(i * span / denom), half up, in integers
        const std::size_t pos = (2 * i * span + denom) / (2 * denom);
        if (out.empty() || out.back() != pos) out.push_back(pos);
    }
    return out;
}

namespace {

bool axis_covered(const std::vector<std::size_t>& starts, std::size_t window, std::size_t dim) {
    if (starts.empty() || starts.front() != 0 || starts.back() + window != dim) return false;
    for (std::size_t i = 1; i < starts.size(); ++i) {
        if (starts[i] - starts[i - 1] > window) return false;
    }
    return true;
}

} // namespace

subsample_plan plan_subsamples(std::size_t rows, std::size_t cols, const subsample_config& cfg) {
    if (rows < 1 || cols < 1) throw config_error("plan_subsamples: matrix must be at least 1x1");
    cfg.validate();

    subsample_plan plan;
    std::size_t wr = 0, wc = 0;
    if (cfg.window == window_mode::min_dimension) {
        const std::size_t d = std::min(rows, cols);
        wr = d;
        wc = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(static_cast<double>(d) / cfg.q_ratio)));
    } else {
        wr = cfg.window_rows;
        wc = cfg.window_cols;
    }

    if (wr > rows || wc > cols) {
        if (!cfg.clamp_window) {
            throw config_error("plan_subsamples: window " + std::to_string(wr) + "x" + std::to_string(wc) +
                               " does not fit a " + std::to_string(rows) + "x" + std::to_string(cols) +
                               " matrix and clamping is disabled");
        }
        wr = std::min(wr, rows);
        wc = std::min(wc, cols);
        plan.clamped = true;
    }
    plan.window_rows = wr;
    plan.window_cols = wc;
    plan.aspect_preserved =
        std::abs(static_cast<double>(wr) - cfg.q_ratio * static_cast<double>(wc)) <= 1.0;

    std::size_t rc = 1, cc = 1;
    if (cfg.steps == step_mode::automatic) {
        rc = std::max<std::size_t>(1, rows / wr);
        cc = std::max<std::size_t>(1, cols / wc);
    } else {
        rc = cfg.row_steps;
        cc = cfg.col_steps;
    }
    const auto row_starts = axis_offsets(rows, wr, rc);
    const auto col_starts = axis_offsets(cols, wc, cc);
    plan.offsets.reserve(row_starts.size() * col_starts.size());
    for (auto r : row_starts) {
        for (auto c : col_starts) plan.offsets.push_back({r, c});
    }
    plan.covers_full_matrix = axis_covered(row_starts, wr, rows) && axis_covered(col_starts, wc, cols);
    return plan;
}

namespace {

std::string window_context(const offset& o) {
    return "(window at row " + std::to_string(o.row) + ", col " + std::to_string(o.col) + ")";
}

} // namespace

esd farms_esd_linear(const Eigen::Ref<const Eigen::MatrixXd>& m, const subsample_config& cfg) {
    const Eigen::MatrixXd oriented = m.rows() >= m.cols() ? Eigen::MatrixXd(m) : Eigen::MatrixXd(m.transpose());
    const auto plan = plan_subsamples(static_cast<std::size_t>(oriented.rows()),
                                      static_cast<std::size_t>(oriented.cols()), cfg);
    const auto wr = static_cast<Eigen::Index>(plan.window_rows);
    const auto wc = static_cast<Eigen::Index>(plan.window_cols);
    const std::size_t count = plan.offsets.size();

    std::vector<esd> parts(count);
    std::vector<std::exception_ptr> errors(count);
#pragma omp parallel for schedule(dynamic) if (detail::run_parallel(count))
    for (std::size_t i = 0; i < count; ++i) {
        const auto& o = plan.offsets[i];
        try {
            parts[i] = esd_of_matrix(
                oriented.block(static_cast<Eigen::Index>(o.row), static_cast<Eigen::Index>(o.col), wr, wc),
                window_context(o));
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return concatenate(std::move(parts));
}

double farms_alpha_linear(const Eigen::Ref<const Eigen::MatrixXd>& m, const subsample_config& cfg) {
    return hill_alpha(farms_esd_linear(m, cfg), cfg.hill);
}

} // namespace farms
