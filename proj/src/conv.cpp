#include "farms/error.hpp"
#include "farms/sampler.hpp"
#include "parallel.hpp"

#include <exception>
#include <numeric>

namespace farms {

Eigen::MatrixXd conv_view::slice(std::size_t s) const {
    const std::size_t l = slices();
    Eigen::MatrixXd out(static_cast<Eigen::Index>(c1), static_cast<Eigen::Index>(c2));
    for (std::size_t i = 0; i < c1; ++i) {
        for (std::size_t j = 0; j < c2; ++j) {
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data[(i * c2 + j) * l + s];
        }
    }
    return out;
}

namespace {

void check_view(const conv_view& t) {
    if (t.c1 < 1 || t.c2 < 1 || t.kh < 1 || t.kw < 1) throw config_error("conv tensor dimensions must be >= 1");
    if (t.data.size() != t.c1 * t.c2 * t.kh * t.kw) throw config_error("conv tensor data size mismatch");
    if (t.c1 * t.c2 < 4) throw config_error("conv tensor needs C1 * C2 >= 4 for tail estimation");
}

// Kernel slices with rows >= cols.
std::vector<Eigen::MatrixXd> oriented_slices(const conv_view& t) {
    std::vector<Eigen::MatrixXd> out;
    out.reserve(t.slices());
    for (std::size_t s = 0; s < t.slices(); ++s) {
        Eigen::MatrixXd m = t.slice(s);
        if (m.rows() < m.cols()) m.transposeInPlace();
        out.push_back(std::move(m));
    }
    return out;
}

// Block grid of floor(C1/m') x floor(C2/n'); a window that does not fit
// falls back to a single block covering the whole slice.
subsample_plan conv_plan(std::size_t rows, std::size_t cols, subsample_config cfg) {
    cfg.clamp_window = true;
    auto plan = plan_subsamples(rows, cols, cfg);
    if (plan.clamped) {
        plan.window_rows = rows;
        plan.window_cols = cols;
        plan.offsets = {offset{0, 0}};
        plan.covers_full_matrix = true;
    }
    return plan;
}

} // namespace

esd baseline_esd_conv(const conv_view& t) {
    check_view(t);
    const auto slices = oriented_slices(t);
    std::vector<esd> parts(slices.size());
    std::vector<std::exception_ptr> errors(slices.size());
#pragma omp parallel for schedule(dynamic) if (detail::run_parallel(slices.size()))
    for (std::size_t s = 0; s < slices.size(); ++s) {
        try {
            parts[s] = esd_of_matrix(slices[s], "(kernel slice " + std::to_string(s) + ")");
        } catch (...) {
            errors[s] = std::current_exception();
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return concatenate(std::move(parts));
}

conv_result farms_conv(const conv_view& t, const subsample_config& cfg) {
    check_view(t);
    const auto slices = oriented_slices(t);
    const auto rows = static_cast<std::size_t>(slices.front().rows());
    const auto cols = static_cast<std::size_t>(slices.front().cols());
    const auto plan = conv_plan(rows, cols, cfg);
    const std::size_t blocks = plan.offsets.size();
    const std::size_t l = slices.size();
    const auto wr = static_cast<Eigen::Index>(plan.window_rows);
    const auto wc = static_cast<Eigen::Index>(plan.window_cols);

    // Flattened (block, slice) work list, block-major.
    std::vector<esd> parts(blocks * l);
    std::vector<std::exception_ptr> errors(blocks * l);
#pragma omp parallel for schedule(dynamic) if (detail::run_parallel(blocks * l))
    for (std::size_t idx = 0; idx < blocks * l; ++idx) {
        const auto& o = plan.offsets[idx / l];
        const std::size_t s = idx % l;
        try {
            parts[idx] = esd_of_matrix(
                slices[s].block(static_cast<Eigen::Index>(o.row), static_cast<Eigen::Index>(o.col), wr, wc),
                "(kernel slice " + std::to_string(s) + ", block at row " + std::to_string(o.row) + ", col " +
                    std::to_string(o.col) + ")");
        } catch (...) {
            errors[idx] = std::current_exception();
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    conv_result out;
    out.block_count = blocks;
    out.submatrix_count = blocks * l;
    if (cfg.aggregation == conv_aggregation::concatenate_all) {
        const esd all = concatenate(std::move(parts));
        out.esd_size = all.size();
        out.alpha = hill_alpha(all, cfg.hill);
        return out;
    }
    out.block_alphas.resize(blocks);
    for (std::size_t b = 0; b < blocks; ++b) {
        std::vector<esd> group(std::make_move_iterator(parts.begin() + static_cast<std::ptrdiff_t>(b * l)),
                               std::make_move_iterator(parts.begin() + static_cast<std::ptrdiff_t>((b + 1) * l)));
        const esd merged = concatenate(std::move(group));
        out.esd_size += merged.size();
        out.block_alphas[b] = hill_alpha(merged, cfg.hill);
    }
    out.alpha = std::accumulate(out.block_alphas.begin(), out.block_alphas.end(), 0.0) /
                static_cast<double>(blocks);
    return out;
}

double farms_alpha_conv(const conv_view& t, const subsample_config& cfg) { return farms_conv(t, cfg).alpha; }

} // namespace farms
