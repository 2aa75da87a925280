#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace farms {

using matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using matrix_view = Eigen::Map<const matrix>;

/// Empirical spectral density: eigenvalues of W^T W (squared singular values),
/// sorted ascending, all >= 0.
struct esd {
    std::vector<double> eigenvalues;
    std::size_t source_count = 1;

    std::size_t size() const { return eigenvalues.size(); }
};

struct hill_config {
    enum class mode { fixed, fraction };

    mode k_mode = mode::fraction;
    std::size_t fixed_k = 1;
    double fraction = 0.5;
    // Eigenvalues <= eps_relative * max are dropped before estimation.
    double eps_relative = 1e-12;

    static hill_config fixed(std::size_t k) {
        hill_config c;
        c.k_mode = mode::fixed;
        c.fixed_k = k;
        return c;
    }
    static hill_config with_fraction(double f) {
        hill_config c;
        c.fraction = f;
        return c;
    }

    void validate() const;
};

/// Squared singular values of `m`, ascending. `context` is appended to SVD
/// failure messages.
esd esd_of_matrix(const Eigen::Ref<const Eigen::MatrixXd>& m, const std::string& context = {});

/// Merges several ESDs into one ascending sequence; source_count adds up.
esd concatenate(std::vector<esd> parts);

std::size_t resolve_k(std::size_t n_usable, const hill_config& cfg);

/// Top-k Hill estimate of the power-law exponent of the ESD tail:
///   1 + k / sum_{i=1..k} ln(lambda_{n-i+1} / lambda_{n-k})
/// The estimate is for the eigenvalue density; the exponent of the
/// singular-value density is 2 * alpha - 1.
double hill_alpha(const esd& e, const hill_config& cfg = {});

/// Hill on a raw ascending sample; used by the Pareto validation bench.
double hill_alpha_sorted(std::span<const double> ascending, const hill_config& cfg = {});

// Marchenko-Pastur law for (1/n) X X^T with y = m/n.

struct mp_params {
    double y = 1.0;
    double lower = 0.0;
    double upper = 4.0;
    double atom_mass = 0.0;
};

mp_params mp_parameters(double y);
std::pair<double, double> mp_bulk_edges(double y);

struct mp_density_value {
    double continuous = 0.0;
    double atom_at_zero = 0.0;
};

mp_density_value mp_density(double x, double y);

/// Tabulated MP distribution function on a Chebyshev-style grid of at least
/// 4096 points.
class mp_cdf {
public:
    explicit mp_cdf(double y, std::size_t grid_points = 4096);

    double operator()(double x) const;
    /// Inverse of the distribution function restricted to p in (atom, 1).
    double quantile(double p) const;

    const mp_params& params() const { return params_; }

private:
    mp_params params_;
    std::vector<double> theta_;
    std::vector<double> cumulative_;
};

/// Kolmogorov-Smirnov distance between the normalized ESD and the MP law.
/// Eigenvalues are divided by variance_scale * n, where n = count / y when
/// y <= 1 and n = count otherwise (the zero eigenvalues of the larger Gram
/// matrix are accounted for by the MP atom).
double ks_distance_to_mp(const esd& e, double y, double variance_scale = 1.0);

} // namespace farms
