// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "cli.hpp"
#include "farms/allocators.hpp"
#include "farms/report.hpp"
#include "farms/sampler.hpp"
#include "farms/spectral.hpp"
#include "farms/synth.hpp"
#include "farms/tensor_io.hpp"
#include "support.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

using namespace farms;

namespace {

struct verdict {
    bool pass = true;
    std::string detail;
};

class scorecard {
public:
    void run(int id, const std::string& name, double budget_seconds, const std::function<verdict()>& body) {
        const auto t0 = std::chrono::steady_clock::now();
        verdict v;
        try {
            v = body();
        } catch (const std::exception& ex) {
            v = {false, std::string("exception: ") + ex.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (budget_seconds > 0 && secs > budget_seconds) {
            v.pass = false;
            v.detail += "; over time budget of " + std::to_string(static_cast<int>(budget_seconds)) + " s";
        }
        char head[160];
        std::snprintf(head, sizeof head, "[%s] %2d %-28s (%.1f s) ", v.pass ? "PASS" : "FAIL", id, name.c_str(), secs);
        std::cout << head << v.detail << std::endl;
        failures_ += v.pass ? 0 : 1;
    }
    int failures() const { return failures_; }

private:
    int failures_ = 0;
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// Inverse-CDF Pareto draws from the standard library generator.
std::vector<double> pareto_std(double alpha, std::size_t n, std::mt19937_64& gen) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> out(n);
    for (auto& x : out) x = std::pow(1.0 - u(gen), -1.0 / (alpha - 1.0));
    std::sort(out.begin(), out.end());
    return out;
}

verdict hill_oracle() {
    verdict v;
    std::mt19937_64 gen(20240601);
    for (double alpha : {1.5, 2.5, 4.0}) {
        double mean = 0.0;
        for (int t = 0; t < 20; ++t) mean += hill_alpha_sorted(pareto_std(alpha, 10000, gen)) / 20.0;
        const bool ok = std::abs(mean - alpha) <= 0.1;
        v.pass &= ok;
        v.detail += "alpha " + fmt("%.1f", alpha) + " -> " + fmt("%.4f", mean) + (ok ? "" : " (off)") + "; ";
    }
    return v;
}

verdict mp_convergence() {
    verdict v;
    double worst = 0.0;
    for (std::uint64_t t = 0; t < 5; ++t) {
        const auto x = gen_gaussian({1000, 4000, variance_mode::unit, counter_rng(4000).derive(t).key()});
        const double ks = ks_distance_to_mp(esd_of_matrix(x), 0.25);
        worst = std::max(worst, ks);
        v.pass &= ks < 0.03;
    }
    v.detail = "max KS over 5 trials " + fmt("%.5f", worst) + " (< 0.03)";
    const std::pair<double, std::pair<double, double>> edges[] = {
        {0.25, {0.25, 2.25}}, {1.0, {0.0, 4.0}}, {4.0, {1.0, 9.0}}};
    double edge_err = 0.0;
    for (const auto& [y, want] : edges) {
        const auto got = mp_bulk_edges(y);
        edge_err = std::max({edge_err, std::abs(got.first - want.first), std::abs(got.second - want.second)});
    }
    v.pass &= edge_err <= 1e-12;
    v.detail += "; bulk-edge max error " + fmt("%.1e", edge_err);
    return v;
}

verdict aspect_bias() {
    const auto r = bias_sweep({{100, 100}, {200, 100}, {512, 100}, {1024, 100}}, 20, {}, 8);
    verdict v;
    bool increasing = true;
    for (std::size_t i = 1; i < r.rows.size(); ++i) increasing &= r.rows[i].baseline_mean > r.rows[i - 1].baseline_mean;
    v.pass = increasing && r.errors.empty() && r.farms_range < 0.5 * r.baseline_range;
    v.detail = "baseline means";
    for (const auto& row : r.rows) v.detail += " " + fmt("%.3f", row.baseline_mean);
    v.detail += increasing ? " (increasing)" : " (NOT increasing)";
    v.detail += "; range farms " + fmt("%.4f", r.farms_range) + " vs baseline " + fmt("%.4f", r.baseline_range);
    return v;
}

verdict identity_reduction() {
    std::mt19937_64 gen(404);
    std::uniform_int_distribution<std::size_t> dim(2, 160);
    int mismatches = 0;
    for (int i = 0; i < 100; ++i) {
        const std::size_t m = dim(gen), n = dim(gen);
        const auto w = gen_gaussian({m, n, variance_mode::he_fan_in, gen()});
        subsample_config c;
        c.window = window_mode::explicit_size;
        c.window_rows = std::max(m, n);
        c.window_cols = std::min(m, n);
        c.q_ratio = static_cast<double>(c.window_rows) / static_cast<double>(c.window_cols);
        c.steps = step_mode::grid;
        if (farms_alpha_linear(w, c) != hill_alpha(esd_of_matrix(w), c.hill)) ++mismatches;
    }
    return {mismatches == 0, std::to_string(100 - mismatches) + "/100 shapes bit-identical"};
}

std::vector<double> histogram(const std::vector<double>& v, double lo, double hi, std::size_t bins) {
    std::vector<double> h(bins, 0.0);
    for (double x : v) {
        const double t = (x - lo) / (hi - lo) * static_cast<double>(bins);
        h[static_cast<std::size_t>(std::clamp(t, 0.0, static_cast<double>(bins - 1)))] += 1.0;
    }
    for (auto& x : h) x /= static_cast<double>(v.size());
    return h;
}

verdict averaging_duality() {
    std::mt19937_64 gen(505);
    std::uniform_int_distribution<std::size_t> dim(8, 300);
    double worst = 0.0;
    for (int layer = 0; layer < 50; ++layer) {
        const std::size_t m = dim(gen), n = dim(gen);
        const Eigen::MatrixXd w = gen_gaussian({m, n, variance_mode::unit, gen()});
        subsample_config c;
        if (layer % 2) {
            const std::size_t side = std::max<std::size_t>(2, std::min(m, n) / 2);
            c.window = window_mode::explicit_size;
            c.window_rows = c.window_cols = side;
            c.steps = step_mode::grid;
            c.row_steps = 1 + gen() % 4;
            c.col_steps = 1 + gen() % 4;
        }
        const auto whole = farms_esd_linear(w, c);
        const Eigen::MatrixXd o = w.rows() >= w.cols() ? w : Eigen::MatrixXd(w.transpose());
        const auto plan = plan_subsamples(static_cast<std::size_t>(o.rows()), static_cast<std::size_t>(o.cols()), c);
        std::vector<std::vector<double>> parts;
        for (const auto& off : plan.offsets) {
            parts.push_back(esd_of_matrix(o.block(static_cast<Eigen::Index>(off.row), static_cast<Eigen::Index>(off.col),
                                                  static_cast<Eigen::Index>(plan.window_rows),
                                                  static_cast<Eigen::Index>(plan.window_cols)))
                                .eigenvalues);
        }
        const double top = whole.eigenvalues.back();
        for (auto [bins, hi] : {std::pair{10, 1.0}, std::pair{37, 1.2}, std::pair{128, 0.5}}) {
            const auto h = histogram(whole.eigenvalues, 0.0, top * hi, static_cast<std::size_t>(bins));
            std::vector<double> mean(static_cast<std::size_t>(bins), 0.0);
            for (const auto& p : parts) {
                const auto hp = histogram(p, 0.0, top * hi, static_cast<std::size_t>(bins));
                for (std::size_t b = 0; b < mean.size(); ++b) mean[b] += hp[b] / static_cast<double>(parts.size());
            }
            for (std::size_t b = 0; b < mean.size(); ++b) worst = std::max(worst, std::abs(mean[b] - h[b]));
        }
    }
    return {worst <= 1e-12, "max per-bin difference " + fmt("%.2e", worst) + " over 50 layers x 3 binnings"};
}

verdict allocator_contracts() {
    verdict v;
    std::vector<layer_report> layers;
    for (double a : {2.0, 3.0, 4.0}) {
        layer_report r;
        r.name = "l";
        r.shape = {64, 64};
        r.farms_alpha = r.baseline_alpha = a;
        layers.push_back(r);
    }
    lr_schedule_config lr;
    lr.selection.enabled = false;
    const auto rates = assign_learning_rates(layers, lr, alpha_metric::farms);
    const bool endpoints = rates.per_layer[0].value == lr.s1 * lr.eta && rates.per_layer[2].value == lr.s2 * lr.eta;
    for (auto& r : layers) r.farms_alpha = 3.2;
    const auto flat = assign_learning_rates(layers, lr, alpha_metric::farms);
    bool midpoint = true;
    for (const auto& e : flat.per_layer) midpoint &= std::abs(e.value - lr.eta * (lr.s1 + lr.s2) / 2) <= 1e-15;

    std::mt19937_64 gen(606);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    int clamp_active = 0, monotone_violations = 0, infeasible = 0;
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t n = 2 + static_cast<std::size_t>(u(gen) * 40);
        std::vector<double> a(n), w(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = 1.5 + 6.0 * u(gen);
            w[i] = std::floor(1 + 1e7 * u(gen));
        }
        sparsity_config c;
        c.target = 0.05 + 0.9 * u(gen);
        c.tau = 0.3 * u(gen);
        c.clamp_hi = std::min(0.99, c.target + 0.02 + 0.3 * u(gen));
        c.clamp_lo = std::max(0.0, c.target - 0.02 - 0.3 * u(gen));
        const auto s = allocate_sparsity(a, w, c);
        infeasible += s.feasible ? 0 : 1;
        double sw = 0, t = 0;
        bool touched = false;
        for (std::size_t i = 0; i < n; ++i) {
            sw += s.values[i] * w[i];
            t += w[i];
            touched |= s.values[i] == c.clamp_hi || s.values[i] == c.clamp_lo;
            for (std::size_t j = 0; j < n; ++j) monotone_violations += a[i] > a[j] && s.values[i] < s.values[j];
        }
        worst = std::max(worst, std::abs(sw / t - c.target));
        clamp_active += touched;
    }
    v.pass = endpoints && midpoint && worst <= 1e-9 && monotone_violations == 0 && infeasible == 0 && clamp_active > 0;
    v.detail = std::string("LR endpoints ") + (endpoints ? "exact" : "WRONG") + ", midpoint " +
               (midpoint ? "exact" : "WRONG") + "; sparsity max |mean - S| " + fmt("%.1e", worst) + " on 200 instances (" +
               std::to_string(clamp_active) + " clamp-active), monotonicity violations " +
               std::to_string(monotone_violations);
    return v;
}

verdict conv_regression() {
    verdict v;
    subsample_config cat;
    cat.aggregation = conv_aggregation::concatenate_all;
    int exact = 0, total = 0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        const std::size_t c1 = 20 + 13 * s, c2 = 16 + 5 * s;
        const auto w = gen_gaussian({c1, c2, variance_mode::he_fan_in, s});
        const auto data = farms::testing::row_major(w);
        const conv_view view{data, c1, c2, 1, 1};
        const double linear = farms_alpha_linear(w, {});
        exact += farms_alpha_conv(view, cat) == linear;
        ++total;
        if (farms_conv(view, {}).block_count == 1) {
            exact += farms_alpha_conv(view, {}) == linear;
            ++total;
        }
    }
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        const std::size_t c1 = 24 + 9 * s, c2 = 12 + 4 * s;
        const auto w = gen_gaussian({c1, c2, variance_mode::unit, 100 + s});
        std::vector<double> nine;
        for (std::size_t i = 0; i < c1; ++i) {
            for (std::size_t j = 0; j < c2; ++j) {
                for (int k = 0; k < 9; ++k) nine.push_back(w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
            }
        }
        const auto single = farms::testing::row_major(w);
        const double a9 = farms_alpha_conv(conv_view{nine, c1, c2, 3, 3}, {});
        const double a1 = farms_alpha_conv(conv_view{single, c1, c2, 1, 1}, {});
        worst = std::max(worst, std::abs(a9 - a1) / a1);
    }
    v.pass = exact == total && worst <= 1e-9;
    v.detail = "1x1 reduction exact in " + std::to_string(exact) + "/" + std::to_string(total) +
               " cases; replicated-slice max relative gap " + fmt("%.1e", worst);
    return v;
}

verdict toy_correlation() {
    const toy_config cfg; // widths 250..2000, d = 500, 3 seeds
    const auto r = toy_sweep(cfg);
    const double rf = r.pearson_width_means.farms, rb = r.pearson_width_means.baseline;
    verdict v;
    v.pass = rf <= -0.6 && std::abs(rf) > std::abs(rb);
    v.detail = "Pearson over per-width means: farms " + fmt("%.3f", rf) + ", baseline " + fmt("%.3f", rb) +
               " (pooled runs: farms " + fmt("%.3f", r.pearson_pooled.farms) + ", baseline " +
               fmt("%.3f", r.pearson_pooled.baseline) + ")";
    return v;
}

std::string slurp_dir(const std::filesystem::path& dir) {
    std::set<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) files.insert(e.path());
    std::string all;
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        all += f.filename().string() + "\n" + ss.str();
    }
    return all;
}

verdict cli_determinism() {
    farms::testing::scratch_dir dir("acceptance_cli");
    auto he = [](std::size_t m, std::size_t n, std::uint64_t s) {
        return farms::testing::row_major(gen_gaussian({m, n, variance_mode::he_fan_in, s}));
    };
    write_checkpoint(dir.path(), "fixture",
                     {{"stem", layer_kind::conv2d, {32, 16, 3, 3}, he(32 * 16, 9, 1)},
                      {"block.conv", layer_kind::conv2d, {128, 32, 3, 3}, he(128 * 32, 9, 2)},
                      {"block.fc", layer_kind::linear, {300, 120}, he(300, 120, 3)},
                      {"head", layer_kind::linear, {120, 10}, he(120, 10, 4)}});
    const auto manifest = (dir / "manifest.json").string();
    const std::vector<std::vector<std::string>> commands{
        {"analyze", "--manifest", manifest},
        {"allocate-lr", "--manifest", manifest},
        {"allocate-sparsity", "--manifest", manifest, "--target", "0.5"},
        {"mp-check", "--m", "100", "--n", "400", "--trials", "3"},
        {"bias-bench", "--shapes", "100x100,200x100,512x100", "--trials", "4"},
        {"toy-align", "--input-dim", "40", "--widths", "20,40,80", "--seeds", "2", "--steps", "10", "--batch-size",
         "100", "--eval-stride", "2"}};
    verdict v;
    int identical = 0;
    for (const auto& cmd : commands) {
        std::string reference;
        bool same = true;
        for (const char* threads : {"1", "2", "5"}) {
            const auto out = dir / (cmd[0] + "_" + threads);
            auto args = cmd;
            args.insert(args.end(), {"--out", out.string(), "--format", "both", "--threads", threads});
            std::ostringstream so, se;
            const int code = cli::run(args, so, se);
            if (code != 0) {
                same = false;
                v.detail += cmd[0] + " exited " + std::to_string(code) + "; ";
                break;
            }
            const auto bytes = slurp_dir(out);
            if (reference.empty()) {
                reference = bytes;
            } else {
                same &= bytes == reference;
            }
        }
        identical += same;
    }
    v.pass = identical == static_cast<int>(commands.size());
    v.detail += std::to_string(identical) + "/" + std::to_string(commands.size()) +
                " commands byte-identical across --threads 1, 2, 5";
    return v;
}

verdict plan_conformance() {
    const auto small = plan_subsamples(512, 100, {});
    subsample_config big;
    big.window = window_mode::explicit_size;
    big.window_rows = big.window_cols = 2000;
    big.steps = step_mode::grid;
    big.row_steps = big.col_steps = 10;
    const auto large = plan_subsamples(4096, 11008, big);
    const std::set<offset> unique(large.offsets.begin(), large.offsets.end());
    verdict v;
    v.pass = small.offsets.size() == 5 && unique.size() == 100 && large.offsets.size() == 100 &&
             unique.count({0, 0}) == 1 && unique.count({2096, 9008}) == 1;
    v.detail = "(512,100): " + std::to_string(small.offsets.size()) + " offsets; (4096,11008): " +
               std::to_string(unique.size()) + " unique, (0,0) " + (unique.count({0, 0}) ? "present" : "missing") +
               ", (2096,9008) " + (unique.count({2096, 9008}) ? "present" : "missing");
    return v;
}

} // namespace

int main() {
    scorecard card;
    card.run(1, "hill-oracle", 5, hill_oracle);
    card.run(2, "mp-convergence", 60, mp_convergence);
    card.run(3, "aspect-ratio-bias", 120, aspect_bias);
    card.run(4, "identity-reduction", 0, identity_reduction);
    card.run(5, "concat-averaging-duality", 0, averaging_duality);
    card.run(6, "allocator-contracts", 0, allocator_contracts);
    card.run(7, "conv-regression", 0, conv_regression);
    card.run(8, "toy-training-correlation", 600, toy_correlation);
    card.run(9, "cli-determinism", 0, cli_determinism);
    card.run(10, "plan-conformance", 0, plan_conformance);
    std::cout << (card.failures() == 0 ? "all criteria passed" : std::to_string(card.failures()) + " criteria failed")
              << std::endl;
    return card.failures() == 0 ? 0 : 1;
}
