#include "farms/error.hpp"
#include "farms/synth.hpp"
#include "parallel.hpp"

#include <cmath>
#include <optional>

namespace farms {

void toy_config::validate() const {
    if (input_dim < 2) throw config_error("toy: input dimension must be >= 2");
    if (widths.empty()) throw config_error("toy: width list is empty");
    for (auto w : widths) {
        if (w < 2) throw config_error("toy: widths must be >= 2");
    }
    if (seeds < 1) throw config_error("toy: need at least one seed");
    if (batch_size < 1) throw config_error("toy: batch size must be >= 1");
    if (eval_stride < 1) throw config_error("toy: evaluation stride must be >= 1");
    if (!(learning_rate > 0.0)) throw config_error("toy: learning rate must be > 0");
    farms.validate();
}

double alignment(const Eigen::Ref<const Eigen::MatrixXd>& w, const Eigen::Ref<const Eigen::VectorXd>& w_star) {
    if (w.cols() != w_star.size()) throw config_error("alignment: dimension mismatch");
    Eigen::BDCSVD<Eigen::MatrixXd> svd(w, Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) throw spectrum_error(spectrum_error::reason::svd_failure, "alignment SVD failed");
    const Eigen::VectorXd v1 = svd.matrixV().col(0);
    const double norm = w_star.norm();
    if (!(norm > 0.0)) throw config_error("alignment: zero target vector");
    return std::min(1.0, std::abs(v1.dot(w_star)) / norm);
}

namespace {

constexpr std::uint64_t teacher_stream = 0x7eac4e5ULL;

double act(activation a, double z) { return a == activation::relu ? (z > 0.0 ? z : 0.0) : std::tanh(z); }

double act_grad(activation a, double z) {
    if (a == activation::relu) return z > 0.0 ? 1.0 : 0.0;
    const double t = std::tanh(z);
    return 1.0 - t * t;
}

void fill_normal(Eigen::MatrixXd& m, const counter_rng& rng, std::uint64_t base) {
    const auto rows = m.rows();
    const auto cols = m.cols();
#pragma omp parallel for schedule(static) if (detail::run_parallel(static_cast<std::size_t>(rows)))
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            m(i, j) = rng.normal(base + static_cast<std::uint64_t>(i * cols + j));
        }
    }
}

} // namespace

alignment_series teacher_student_run(const toy_config& cfg, std::size_t width, std::size_t seed_index,
                                     bool all_alphas) {
    cfg.validate();
    if (width < 2) throw config_error("toy: width must be >= 2");
    const auto d = static_cast<Eigen::Index>(cfg.input_dim);
    const auto p = static_cast<Eigen::Index>(width);
    const auto bs = static_cast<Eigen::Index>(cfg.batch_size);
    const double inv_sqrt_p = 1.0 / std::sqrt(static_cast<double>(width));

    // The teacher is shared by every width of the same seed.
    const counter_rng root(cfg.seed);
    const counter_rng teacher_rng = root.derive(teacher_stream, seed_index);
    Eigen::VectorXd w_star(d);
    for (Eigen::Index i = 0; i < d; ++i) w_star[i] = teacher_rng.normal(static_cast<std::uint64_t>(i));
    w_star.normalize();

    const counter_rng student_rng = root.derive(width, seed_index);
    const counter_rng init_rng = student_rng.derive(0);
    const counter_rng sign_rng = student_rng.derive(1);
    const counter_rng data_rng = student_rng.derive(2);

    Eigen::MatrixXd w(p, d);
    fill_normal(w, init_rng, 0);
    w /= std::sqrt(static_cast<double>(cfg.input_dim));
    Eigen::VectorXd a(p);
    for (Eigen::Index j = 0; j < p; ++j) a[j] = sign_rng.uniform(static_cast<std::uint64_t>(j)) < 0.5 ? -1.0 : 1.0;
    if (cfg.init_spike != 0.0) w += cfg.init_spike * (a * inv_sqrt_p) * w_star.transpose();

    alignment_series out;
    out.width = width;
    out.seed_index = seed_index;
    std::optional<Eigen::MatrixXd> best_w;

    auto checkpoint = [&](std::size_t step) {
        toy_checkpoint c;
        c.step = step;
        c.alignment = alignment(w, w_star);
        if (all_alphas) {
            c.baseline_alpha = hill_alpha(esd_of_matrix(w), cfg.farms.hill);
            c.farms_alpha = farms_alpha_linear(w, cfg.farms);
        }
        if (!best_w || c.alignment > out.best.alignment) {
            out.best = c;
            best_w = w;
        }
        out.checkpoints.push_back(c);
    };

    Eigen::MatrixXd x(bs, d);
    for (std::size_t step = 0;; ++step) {
        if (step % cfg.eval_stride == 0 || step == cfg.steps) checkpoint(step);
        if (step == cfg.steps) break;

        fill_normal(x, data_rng, static_cast<std::uint64_t>(step) * static_cast<std::uint64_t>(bs * d));
        const Eigen::VectorXd proj = x * w_star;
        const Eigen::MatrixXd h = x * w.transpose(); // bs x p
        Eigen::MatrixXd dh(bs, p);
        double loss = 0.0;
        for (Eigen::Index b = 0; b < bs; ++b) {
            double f = 0.0;
            for (Eigen::Index j = 0; j < p; ++j) f += a[j] * act(cfg.act, h(b, j));
            f *= inv_sqrt_p;
            const double r = f - act(cfg.act, proj[b]);
            loss += 0.5 * r * r;
            for (Eigen::Index j = 0; j < p; ++j) dh(b, j) = r * a[j] * act_grad(cfg.act, h(b, j)) * inv_sqrt_p;
        }
        loss /= static_cast<double>(bs);
        out.final_loss = loss;
        if (!std::isfinite(loss)) {
            throw error("toy: training diverged at step " + std::to_string(step) + " (width " +
                        std::to_string(width) + ")");
        }
        w.noalias() -= (cfg.learning_rate / static_cast<double>(bs)) * (dh.transpose() * x);
    }

    if (!all_alphas) {
        out.best.baseline_alpha = hill_alpha(esd_of_matrix(*best_w), cfg.farms.hill);
        out.best.farms_alpha = farms_alpha_linear(*best_w, cfg.farms);
        for (auto& c : out.checkpoints) {
            if (c.step == out.best.step) c = out.best;
        }
    }
    return out;
}

toy_sweep_result toy_sweep(const toy_config& cfg) {
    cfg.validate();
    const std::size_t runs = cfg.widths.size() * cfg.seeds;
    toy_sweep_result out;
    out.runs.resize(runs);
    std::vector<std::string> errors(runs);
#pragma omp parallel for schedule(dynamic) if (detail::run_parallel(runs))
    for (std::size_t i = 0; i < runs; ++i) {
        try {
            out.runs[i] = teacher_student_run(cfg, cfg.widths[i / cfg.seeds], i % cfg.seeds);
        } catch (const std::exception& ex) {
            errors[i] = ex.what();
        }
    }
    for (const auto& e : errors) {
        if (!e.empty()) throw error(e);
    }

    std::vector<double> al, ab, af, pal, pab, paf;
    for (std::size_t wi = 0; wi < cfg.widths.size(); ++wi) {
        width_summary s;
        s.width = cfg.widths[wi];
        for (std::size_t k = 0; k < cfg.seeds; ++k) {
            const auto& best = out.runs[wi * cfg.seeds + k].best;
            s.alignment += best.alignment;
            s.baseline_alpha += best.baseline_alpha;
            s.farms_alpha += best.farms_alpha;
            pal.push_back(best.alignment);
            pab.push_back(best.baseline_alpha);
            paf.push_back(best.farms_alpha);
        }
        const double n = static_cast<double>(cfg.seeds);
        s.alignment /= n;
        s.baseline_alpha /= n;
        s.farms_alpha /= n;
        al.push_back(s.alignment);
        ab.push_back(s.baseline_alpha);
        af.push_back(s.farms_alpha);
        out.per_width.push_back(s);
    }
    if (al.size() >= 3) {
        out.pearson_width_means = {pearson_correlation(ab, al), pearson_correlation(af, al)};
        out.spearman_width_means = {spearman_correlation(ab, al), spearman_correlation(af, al)};
    }
    if (pal.size() >= 3) out.pearson_pooled = {pearson_correlation(pab, pal), pearson_correlation(paf, pal)};
    return out;
}

} // namespace farms
