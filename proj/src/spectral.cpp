#include "farms/spectral.hpp"

#include "farms/error.hpp"

#include <algorithm>
#include <cmath>

namespace farms {

void hill_config::validate() const {
    if (k_mode == mode::fixed && fixed_k < 1) throw config_error("hill: fixed k must be >= 1");
    if (k_mode == mode::fraction && !(fraction > 0.0 && fraction <= 1.0)) {
        throw config_error("hill: fraction must lie in (0, 1]");
    }
    if (!(eps_relative >= 0.0) || !std::isfinite(eps_relative)) throw config_error("hill: eps must be >= 0");
}

esd esd_of_matrix(const Eigen::Ref<const Eigen::MatrixXd>& m, const std::string& context) {
    if (m.rows() < 1 || m.cols() < 1) throw config_error("esd_of_matrix: empty matrix " + context);

    Eigen::VectorXd sv;
    if (m.rows() >= m.cols()) {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
        if (svd.info() != Eigen::Success) {
            throw spectrum_error(spectrum_error::reason::svd_failure, "SVD did not converge " + context);
        }
        sv = svd.singularValues();
    } else {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(m.transpose());
        if (svd.info() != Eigen::Success) {
            throw spectrum_error(spectrum_error::reason::svd_failure, "SVD did not converge " + context);
        }
        sv = svd.singularValues();
    }

    esd out;
    out.eigenvalues.resize(static_cast<std::size_t>(sv.size()));
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (!std::isfinite(sv[i])) {
            throw spectrum_error(spectrum_error::reason::svd_failure, "SVD produced non-finite values " + context);
        }
        out.eigenvalues[static_cast<std::size_t>(i)] = std::max(0.0, sv[i] * sv[i]);
    }
    std::sort(out.eigenvalues.begin(), out.eigenvalues.end());
    return out;
}

esd concatenate(std::vector<esd> parts) {
    esd out;
    out.source_count = 0;
    std::size_t total = 0;
    for (const auto& p : parts) total += p.size();
    out.eigenvalues.reserve(total);
    for (auto& p : parts) {
        out.eigenvalues.insert(out.eigenvalues.end(), p.eigenvalues.begin(), p.eigenvalues.end());
        out.source_count += p.source_count;
    }
    std::sort(out.eigenvalues.begin(), out.eigenvalues.end());
    return out;
}

std::size_t resolve_k(std::size_t n_usable, const hill_config& cfg) {
    if (n_usable < 2) return 1;
    const std::size_t hi = n_usable - 1;
    if (cfg.k_mode == hill_config::mode::fixed) return std::clamp<std::size_t>(cfg.fixed_k, 1, hi);
    const auto k = static_cast<std::size_t>(std::floor(cfg.fraction * static_cast<double>(n_usable)));
    return std::clamp<std::size_t>(k, 1, hi);
}

double hill_alpha_sorted(std::span<const double> ascending, const hill_config& cfg) {
    cfg.validate();
    if (ascending.empty()) throw spectrum_error(spectrum_error::reason::too_few_eigenvalues, "empty spectrum");
    const double eps = cfg.eps_relative * ascending.back();
    const auto first = std::upper_bound(ascending.begin(), ascending.end(), eps);
    const auto usable = std::span<const double>(first, ascending.end());
    const std::size_t n = usable.size();
    if (n < 2) {
        throw spectrum_error(spectrum_error::reason::too_few_eigenvalues,
                             "only " + std::to_string(n) + " eigenvalue(s) above the floor; need at least 2");
    }
    const std::size_t k = resolve_k(n, cfg);
    const double threshold = usable[n - k - 1];
    double sum = 0.0;
    for (std::size_t i = n - k; i < n; ++i) sum += std::log(usable[i] / threshold);
    if (!(sum > 0.0)) {
        throw spectrum_error(spectrum_error::reason::degenerate,
                             "degenerate spectrum: top " + std::to_string(k) + " eigenvalues equal the threshold");
    }
    return 1.0 + static_cast<double>(k) / sum;
}

double hill_alpha(const esd& e, const hill_config& cfg) { return hill_alpha_sorted(e.eigenvalues, cfg); }

} // namespace farms
