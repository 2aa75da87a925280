#include "farms/spectral.hpp"

#include "farms/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace farms {

namespace {

void require_positive_y(double y) {
    if (!(y > 0.0) || !std::isfinite(y)) throw config_error("Marchenko-Pastur parameter y must be > 0");
}

} // namespace

std::pair<double, double> mp_bulk_edges(double y) {
    require_positive_y(y);
    const double r = std::sqrt(y);
    return {(1.0 - r) * (1.0 - r), (1.0 + r) * (1.0 + r)};
}

mp_params mp_parameters(double y) {
    const auto [a, b] = mp_bulk_edges(y);
    return {y, a, b, y > 1.0 ? 1.0 - 1.0 / y : 0.0};
}

mp_density_value mp_density(double x, double y) {
    const auto p = mp_parameters(y);
    mp_density_value out;
    out.atom_at_zero = p.atom_mass;
    if (x > p.lower && x < p.upper) {
        out.continuous = std::sqrt((p.upper - x) * (x - p.lower)) / (2.0 * std::numbers::pi * x * y);
    }
    return out;
}

// The continuous part is integrated in the angle variable
//   x = a + (b - a) sin^2(theta / 2),  theta in [0, pi],
// which removes the square-root edge singularities; the integrand is even
// about both ends so the trapezoid rule converges quickly.
mp_cdf::mp_cdf(double y, std::size_t grid_points) : params_(mp_parameters(y)) {
    grid_points = std::max<std::size_t>(grid_points, 4096);
    const double a = params_.lower;
    const double b = params_.upper;
    const double w = b - a;
    auto integrand = [&](double theta) {
        const double s = std::sin(0.5 * theta);
        const double c = std::cos(0.5 * theta);
        const double x = a + w * s * s;
        if (x <= 0.0) {
            // only reachable at theta = 0 when a = 0 (y = 1)
            return w * c * c / (2.0 * std::numbers::pi * y);
        }
        return w * w * s * s * c * c / (2.0 * std::numbers::pi * y * x);
    };

    theta_.resize(grid_points);
    cumulative_.resize(grid_points);
    const double h = std::numbers::pi / static_cast<double>(grid_points - 1);
    double prev = integrand(0.0);
    double acc = 0.0;
    theta_[0] = 0.0;
    cumulative_[0] = 0.0;
    for (std::size_t i = 1; i < grid_points; ++i) {
        const double t = h * static_cast<double>(i);
        const double cur = integrand(t);
        acc += 0.5 * h * (prev + cur);
        theta_[i] = t;
        cumulative_[i] = acc;
        prev = cur;
    }
}

double mp_cdf::operator()(double x) const {
    if (x < 0.0) return 0.0;
    const double a = params_.lower;
    const double b = params_.upper;
    if (x <= a) return params_.atom_mass;
    if (x >= b) return 1.0;
    const double arg = std::clamp(1.0 - 2.0 * (x - a) / (b - a), -1.0, 1.0);
    const double theta = std::acos(arg);
    const double h = theta_[1];
    const auto i = std::min<std::size_t>(static_cast<std::size_t>(theta / h), theta_.size() - 2);
    const double frac = (theta - theta_[i]) / h;
    const double cont = cumulative_[i] + frac * (cumulative_[i + 1] - cumulative_[i]);
    return std::min(1.0, params_.atom_mass + cont);
}

double mp_cdf::quantile(double p) const {
    if (p <= params_.atom_mass) return 0.0;
    if (p >= 1.0) return params_.upper;
    const double target = p - params_.atom_mass;
    const auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), target);
    if (it == cumulative_.end()) return params_.upper;
    const auto i = static_cast<std::size_t>(it - cumulative_.begin());
    if (i == 0) return params_.lower;
    const double span = cumulative_[i] - cumulative_[i - 1];
    const double frac = span > 0.0 ? (target - cumulative_[i - 1]) / span : 0.0;
    const double theta = theta_[i - 1] + frac * (theta_[i] - theta_[i - 1]);
    const double s = std::sin(0.5 * theta);
    return params_.lower + (params_.upper - params_.lower) * s * s;
}

double ks_distance_to_mp(const esd& e, double y, double variance_scale) {
    require_positive_y(y);
    if (!(variance_scale > 0.0)) throw config_error("ks_distance_to_mp: variance_scale must be > 0");
    if (e.eigenvalues.empty()) throw config_error("ks_distance_to_mp: empty ESD");

    const mp_cdf cdf(y);
    const double count = static_cast<double>(e.size());
    const double n_cols = y <= 1.0 ? count / y : count;
    const double scale = variance_scale * n_cols;
    const double atom = cdf.params().atom_mass;

    double d = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
        const double v = e.eigenvalues[i] / scale;
        const double f = cdf(v);
        const double emp_right = atom + (1.0 - atom) * static_cast<double>(i + 1) / count;
        const double emp_left = atom + (1.0 - atom) * static_cast<double>(i) / count;
        d = std::max({d, std::abs(f - emp_right), std::abs(f - emp_left)});
    }
    return std::min(d, 1.0);
}

} // namespace farms
