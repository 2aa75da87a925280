#include "farms/error.hpp"
#include "farms/spectral.hpp"
#include "support.hpp"

#include <doctest.h>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace farms;

namespace {

// Eigenvalues of the explicitly formed Gram matrix, ascending.
std::vector<double> gram_oracle(const Eigen::MatrixXd& w) {
    const Eigen::MatrixXd g = w.rows() >= w.cols() ? Eigen::MatrixXd(w.transpose() * w)
                                                   : Eigen::MatrixXd(w * w.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
    std::vector<double> v(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    std::sort(v.begin(), v.end());
    return v;
}

// Pareto sample with density ~ x^-alpha on [1, inf), drawn with the standard
// library so it is independent of the library RNG.
std::vector<double> pareto_std(double alpha, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> out(n);
    for (auto& x : out) x = std::pow(1.0 - u(gen), -1.0 / (alpha - 1.0));
    std::sort(out.begin(), out.end());
    return out;
}

double mp_integral(double y) {
    const auto [a, b] = mp_bulk_edges(y);
    boost::math::quadrature::tanh_sinh<double> q;
    return q.integrate([y](double x) { return mp_density(x, y).continuous; }, a, b);
}

} // namespace

TEST_CASE("ESD of simple matrices") {
    CHECK(esd_of_matrix(Eigen::MatrixXd::Identity(3, 3)).eigenvalues == std::vector<double>{1, 1, 1});
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(3, 3);
    d.diagonal() << 1, 2, 3;
    const auto e = esd_of_matrix(d);
    REQUIRE(e.size() == 3);
    CHECK(e.eigenvalues[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(e.eigenvalues[1] == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(e.eigenvalues[2] == doctest::Approx(9.0).epsilon(1e-14));
    CHECK(e.source_count == 1);
}

TEST_CASE("ESD matches the Gram-matrix eigensolver") {
    for (auto [r, c, seed] : {std::tuple{6, 4, 1}, std::tuple{64, 48, 2}, std::tuple{48, 64, 3}, std::tuple{1, 7, 4}}) {
        CAPTURE(r);
        CAPTURE(c);
        const auto w = farms::testing::gaussian(r, c, seed);
        const auto got = esd_of_matrix(w).eigenvalues;
        const auto want = gram_oracle(w);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want[i]) <= 1e-9 * std::abs(want[i]));
    }
}

TEST_CASE("ESD is transpose invariant") {
    const auto w = farms::testing::gaussian(30, 17, 9);
    const auto a = esd_of_matrix(w).eigenvalues;
    const auto b = esd_of_matrix(w.transpose()).eigenvalues;
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-9 * a[i]);
}

TEST_CASE("resolve_k") {
    CHECK(resolve_k(100, hill_config::with_fraction(0.5)) == 50);
    CHECK(resolve_k(2, hill_config::with_fraction(0.5)) == 1);
    CHECK(resolve_k(100, hill_config::fixed(500)) == 99);
    CHECK(resolve_k(100, hill_config::fixed(7)) == 7);
    CHECK(resolve_k(10, hill_config::with_fraction(1.0)) == 9);
    CHECK(resolve_k(10, hill_config::with_fraction(0.01)) == 1);
}

TEST_CASE("Hill estimator closed forms") {
    CHECK(hill_alpha_sorted(std::vector<double>{1.0, std::numbers::e}, hill_config::fixed(1)) ==
          doctest::Approx(2.0).epsilon(1e-15));
    // k = 2 on [1, e, e^2]: threshold 1, sum of logs 3.
    CHECK(hill_alpha_sorted(std::vector<double>{1.0, std::numbers::e, std::exp(2.0)}, hill_config::fixed(2)) ==
          doctest::Approx(1.0 + 2.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("Hill error paths") {
    try {
        hill_alpha_sorted(std::vector<double>{5, 5, 5, 5}, hill_config::fixed(2));
        FAIL("expected degenerate");
    } catch (const spectrum_error& e) {
        CHECK(e.why() == spectrum_error::reason::degenerate);
    }
    try {
        hill_alpha_sorted(std::vector<double>{3.0});
        FAIL("expected too few");
    } catch (const spectrum_error& e) {
        CHECK(e.why() == spectrum_error::reason::too_few_eigenvalues);
    }
    // Numerically zero eigenvalues are dropped by the floor.
    try {
        hill_alpha_sorted(std::vector<double>{0.0, 1e-20, 4.0});
        FAIL("expected too few");
    } catch (const spectrum_error& e) {
        CHECK(e.why() == spectrum_error::reason::too_few_eigenvalues);
    }
    CHECK_THROWS_AS(hill_alpha_sorted(std::vector<double>{}), spectrum_error);
    CHECK_THROWS_AS(hill_alpha_sorted(std::vector<double>{1, 2, 3}, hill_config::with_fraction(0.0)), config_error);
    CHECK_THROWS_AS(hill_alpha_sorted(std::vector<double>{1, 2, 3}, hill_config::with_fraction(1.5)), config_error);
    CHECK_THROWS_AS(hill_alpha_sorted(std::vector<double>{1, 2, 3}, hill_config::fixed(0)), config_error);
}

TEST_CASE("Hill recovers a Pareto exponent of 3") {
    const auto x = pareto_std(3.0, 10000, 42);
    CHECK(std::abs(hill_alpha_sorted(x) - 3.0) < 0.15);
}

TEST_CASE("property: Hill is scale invariant") {
    std::mt19937_64 gen(5);
    for (int rep = 0; rep < 50; ++rep) {
        auto x = pareto_std(2.0 + 0.05 * rep, 200, 100 + rep);
        const double c = std::exp(std::uniform_real_distribution<double>(-20, 20)(gen));
        const double a = hill_alpha_sorted(x);
        for (auto& v : x) v *= c;
        CHECK(std::abs(hill_alpha_sorted(x) - a) <= 1e-12 * a);
    }
}

TEST_CASE("property: stretching the top eigenvalue never increases alpha") {
    for (int rep = 0; rep < 50; ++rep) {
        auto x = pareto_std(2.5, 100, 200 + rep);
        for (auto cfg : {hill_config{}, hill_config::fixed(1), hill_config::fixed(10)}) {
            const double before = hill_alpha_sorted(x, cfg);
            auto y = x;
            y.back() *= 1.0 + 0.5 * (rep + 1);
            CHECK(hill_alpha_sorted(y, cfg) <= before);
        }
    }
}

TEST_CASE("MP bulk edges are exact") {
    CHECK(mp_bulk_edges(1.0) == std::pair{0.0, 4.0});
    CHECK(mp_bulk_edges(0.25) == std::pair{0.25, 2.25});
    CHECK(mp_bulk_edges(4.0) == std::pair{1.0, 9.0});
    CHECK(mp_parameters(4.0).atom_mass == 0.75);
    CHECK(mp_parameters(0.5).atom_mass == 0.0);
    CHECK(mp_parameters(1.0).atom_mass == 0.0);
}

TEST_CASE("MP density values") {
    const auto d = mp_density(2.0, 1.0);
    CHECK(d.continuous == doctest::Approx(1.0 / (2.0 * std::numbers::pi)).epsilon(1e-15));
    CHECK(d.atom_at_zero == 0.0);
    CHECK(mp_density(5.0, 1.0).continuous == 0.0);
    CHECK(mp_density(0.1, 0.25).continuous == 0.0);
    const auto out = mp_density(20.0, 2.0);
    CHECK(out.continuous == 0.0);
    CHECK(out.atom_at_zero == 0.5);
}

TEST_CASE("MP continuous mass by adaptive quadrature") {
    CHECK(std::abs(mp_integral(2.0) - 0.5) < 1e-6);
    for (double y : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        CAPTURE(y);
        CHECK(std::abs(mp_integral(y) + mp_parameters(y).atom_mass - 1.0) < 1e-6);
    }
}

TEST_CASE("tabulated MP CDF agrees with quadrature") {
    boost::math::quadrature::tanh_sinh<double> q;
    for (double y : {0.25, 1.0, 3.0}) {
        const mp_cdf F(y);
        const auto p = mp_parameters(y);
        for (double t : {0.1, 0.3, 0.5, 0.8, 0.95}) {
            const double x = p.lower + t * (p.upper - p.lower);
            const double want = p.atom_mass + q.integrate([y](double s) { return mp_density(s, y).continuous; },
                                                          p.lower, x);
            CAPTURE(y);
            CAPTURE(x);
            CHECK(std::abs(F(x) - want) < 1e-6);
        }
        CHECK(F(p.upper + 1.0) == 1.0);
        CHECK(F(-1.0) == 0.0);
        const double pq = p.atom_mass + 0.6 * (1.0 - p.atom_mass);
        CHECK(std::abs(F(F.quantile(pq)) - pq) < 1e-9);
    }
}

TEST_CASE("KS distance examples") {
    // Constant spectrum sits below the bulk once normalized.
    CHECK(ks_distance_to_mp(esd{{1, 1, 1}}, 0.25) > 0.5);

    // Eigenvalues placed exactly at MP quantiles (midpoint plotting positions).
    const double y = 0.25;
    const std::size_t count = 400;
    const mp_cdf F(y);
    const double n = static_cast<double>(count) / y;
    esd e;
    for (std::size_t i = 0; i < count; ++i) {
        e.eigenvalues.push_back(F.quantile((static_cast<double>(i) + 0.5) / static_cast<double>(count)) * n);
    }
    CHECK(ks_distance_to_mp(e, y) < 1.0 / (2.0 * count) + 1e-4);

    // Same idea above y = 1, where the atom covers the zero eigenvalues.
    const double y2 = 2.0;
    const mp_cdf G(y2);
    esd e2;
    for (std::size_t i = 0; i < count; ++i) {
        const double p = 0.5 + 0.5 * (static_cast<double>(i) + 0.5) / static_cast<double>(count);
        e2.eigenvalues.push_back(G.quantile(p) * static_cast<double>(count));
    }
    CHECK(ks_distance_to_mp(e2, y2) < 1.0 / (4.0 * count) + 1e-4);
}

TEST_CASE("KS of a Gaussian ESD is small and honours variance_scale") {
    const auto x = farms::testing::gaussian(250, 1000, 77);
    const auto e = esd_of_matrix(x);
    const double ks = ks_distance_to_mp(e, 0.25);
    CHECK(ks < 0.05);
    esd scaled = e;
    for (auto& v : scaled.eigenvalues) v *= 9.0;
    CHECK(ks_distance_to_mp(scaled, 0.25, 9.0) == doctest::Approx(ks).epsilon(1e-9));
    CHECK(ks_distance_to_mp(scaled, 0.25) > 0.5);
}

TEST_CASE("concatenate merges sorted and adds source counts") {
    const auto c = concatenate({esd{{1, 4}, 1}, esd{{2, 3}, 2}});
    CHECK(c.eigenvalues == std::vector<double>{1, 2, 3, 4});
    CHECK(c.source_count == 3);
}
