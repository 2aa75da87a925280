#include "cli.hpp"

#include "farms/allocators.hpp"
#include "farms/error.hpp"
#include "farms/report.hpp"
#include "farms/spectral.hpp"
#include "farms/synth.hpp"
#include "farms/tensor_io.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>

namespace farms::cli {
namespace {

namespace fs = std::filesystem;

enum class log_level { error, warn, info };

struct logger {
    std::ostream* sink = nullptr;
    log_level level = log_level::warn;
    void operator()(log_level l, const std::string& msg) const {
        if (sink && l <= level) *sink << "farms: " << msg << '\n';
    }
};

struct common_options {
    std::string config;
    std::string out = "farms_out";
    std::string format = "json";
    std::string log = "warn";
    std::uint64_t seed = 0;
    int threads = 0;
    std::string metric = "farms";
    CLI::Option* seed_opt = nullptr;
    CLI::Option* format_opt = nullptr;
    CLI::Option* out_opt = nullptr;
    CLI::Option* threads_opt = nullptr;
    CLI::Option* metric_opt = nullptr;
};

// Flags that feed a subsample config; each mirrors a key of the config
// file's "subsample" object.
struct subsample_flags {
    double q_ratio = 1.0;
    std::string window;
    std::string steps;
    std::string aggregation;
    std::size_t k = 0;
    double k_fraction = 0.5;
    bool no_clamp = false;
    CLI::Option* q_opt = nullptr;
    CLI::Option* window_opt = nullptr;
    CLI::Option* steps_opt = nullptr;
    CLI::Option* agg_opt = nullptr;
    CLI::Option* k_opt = nullptr;
    CLI::Option* frac_opt = nullptr;
};

std::pair<std::size_t, std::size_t> parse_pair(const std::string& s, const std::string& what) {
    const auto x = s.find_first_of("xX");
    try {
        if (x == std::string::npos) {
            const auto v = std::stoull(s);
            return {v, v};
        }
        return {std::stoull(s.substr(0, x)), std::stoull(s.substr(x + 1))};
    } catch (const std::exception&) {
        throw config_error(what + " must look like N or RxC, got '" + s + "'");
    }
}

std::vector<std::size_t> parse_list(const std::string& s, const std::string& what) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stoull(item));
        } catch (const std::exception&) {
            throw config_error(what + " must be a comma-separated list of integers");
        }
    }
    return out;
}

std::vector<shape2> parse_shapes(const std::string& s) {
    std::vector<shape2> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto [r, c] = parse_pair(item, "shape");
        out.push_back({r, c});
    }
    return out;
}

void add_common(CLI::App* app, common_options& o) {
    app->add_option("--config", o.config, "JSON config file; flags override its values");
    o.out_opt = app->add_option("--out", o.out, "Output directory, created if absent [config: out]");
    o.format_opt = app->add_option("--format", o.format, "Output format [config: format]")
                       ->check(CLI::IsMember({"json", "csv", "both"}));
    o.seed_opt = app->add_option("--seed", o.seed, "Random seed [config: seed]");
    o.threads_opt = app->add_option("--threads", o.threads,
                                    "Worker threads; falls back to FARMS_THREADS, never changes output [config: threads]");
    app->add_option("--log-level", o.log, "Diagnostics on stderr")->check(CLI::IsMember({"error", "warn", "info"}));
}

void add_metric(CLI::App* app, common_options& o) {
    o.metric_opt = app->add_option("--metric", o.metric, "Alpha used for allocation [config: metric]")
                       ->check(CLI::IsMember({"baseline", "farms"}));
}

void add_subsample(CLI::App* app, subsample_flags& f) {
    f.q_opt = app->add_option("--q-ratio", f.q_ratio, "Window aspect ratio rows/cols [config: subsample.q_ratio]");
    f.window_opt = app->add_option("--window", f.window,
                                   "'min' for the min-dimension window, N (cols from Q) or RxC "
                                   "[config: subsample.window = \"min_dimension\" | {rows, cols}]");
    f.steps_opt = app->add_option("--steps", f.steps,
                                  "'auto', N (NxN grid) or RxC grid "
                                  "[config: subsample.steps = \"auto\" | {rows, cols}]");
    f.agg_opt = app->add_option("--conv-aggregation", f.aggregation,
                                "Conv ESD aggregation [config: subsample.conv_aggregation]")
                    ->check(CLI::IsMember({"average_per_block", "concatenate_all"}));
    f.k_opt = app->add_option("--k", f.k, "Fixed Hill tail size [config: subsample.hill = {k_mode: fixed, k}]");
    f.frac_opt = app->add_option("--k-fraction", f.k_fraction,
                                 "Hill tail fraction [config: subsample.hill = {k_mode: fraction, fraction}]");
    app->add_flag("--no-clamp", f.no_clamp,
                  "Fail instead of shrinking windows that do not fit [config: subsample.clamp_window = false]");
}

subsample_config apply_subsample_flags(subsample_config c, const subsample_flags& f) {
    if (f.q_opt->count()) c.q_ratio = f.q_ratio;
    if (f.window_opt->count()) {
        if (f.window == "min" || f.window == "min_dimension") {
            c.window = window_mode::min_dimension;
        } else {
            c.window = window_mode::explicit_size;
            if (f.window.find_first_of("xX") == std::string::npos) {
                c.window_rows = parse_pair(f.window, "--window").first;
                c.window_cols = static_cast<std::size_t>(
                    std::max(1.0, std::floor(static_cast<double>(c.window_rows) / c.q_ratio)));
            } else {
                std::tie(c.window_rows, c.window_cols) = parse_pair(f.window, "--window");
            }
        }
    }
    if (f.steps_opt->count()) {
        if (f.steps == "auto") {
            c.steps = step_mode::automatic;
        } else {
            c.steps = step_mode::grid;
            std::tie(c.row_steps, c.col_steps) = parse_pair(f.steps, "--steps");
        }
    }
    if (f.agg_opt->count()) {
        c.aggregation = f.aggregation == "concatenate_all" ? conv_aggregation::concatenate_all
                                                           : conv_aggregation::average_per_block;
    }
    if (f.k_opt->count()) c.hill = hill_config::fixed(f.k);
    if (f.frac_opt->count()) c.hill = hill_config::with_fraction(f.k_fraction);
    if (f.no_clamp) c.clamp_window = false;
    c.validate();
    return c;
}

// Merged state shared by every subcommand.
struct context {
    json config = json::object();
    common_options common;
    logger log;
    fs::path out_dir;
    bool want_json = true;
    bool want_csv = false;

    const json& section(const char* key) const {
        static const json empty = json::object();
        return config.contains(key) ? config[key] : empty;
    }
    subsample_config base_subsample() const {
        return config.contains("subsample") ? apply_subsample_json({}, config["subsample"]) : subsample_config{};
    }
    std::vector<override_rule> overrides() const {
        return config.contains("overrides") ? parse_overrides(config["overrides"]) : std::vector<override_rule>{};
    }
    alpha_metric metric() const {
        if (common.metric_opt && common.metric_opt->count()) return parse_metric(common.metric);
        if (config.contains("metric")) return parse_metric(config["metric"].get<std::string>());
        return alpha_metric::farms;
    }
    std::uint64_t seed() const {
        if (common.seed_opt->count()) return common.seed;
        return config.value("seed", std::uint64_t{0});
    }
    void emit(const std::string& stem, const json& j, const std::string& csv) const {
        if (want_json) write_text(out_dir / (stem + ".json"), dump(j));
        if (want_csv) write_text(out_dir / (stem + ".csv"), csv);
    }
};

void prepare(context& ctx, std::ostream& err) {
    auto& o = ctx.common;
    if (!o.config.empty()) {
        ctx.config = read_json_file(o.config);
        if (!ctx.config.is_object()) throw schema_error("config file must hold a JSON object");
    }
    ctx.log.sink = &err;
    ctx.log.level = o.log == "error" ? log_level::error : o.log == "info" ? log_level::info : log_level::warn;

    std::string format = o.format;
    if (!o.format_opt->count() && ctx.config.contains("format")) format = ctx.config["format"].get<std::string>();
    if (format != "json" && format != "csv" && format != "both") throw config_error("format must be json, csv or both");
    ctx.want_json = format != "csv";
    ctx.want_csv = format != "json";

    std::string out = o.out;
    if (!o.out_opt->count() && ctx.config.contains("out")) out = ctx.config["out"].get<std::string>();
    ctx.out_dir = out;
    fs::create_directories(ctx.out_dir);

    int threads = 0;
    if (o.threads_opt->count()) {
        threads = o.threads;
    } else if (const char* env = std::getenv("FARMS_THREADS"); env && *env) {
        threads = std::atoi(env);
    } else if (ctx.config.contains("threads")) {
        threads = ctx.config["threads"].get<int>();
    }
    if (threads > 0) omp_set_num_threads(threads);
    ctx.log(log_level::info, "threads: " + std::to_string(threads > 0 ? threads : omp_get_max_threads()));
}

model_report analyze_manifest(const context& ctx, const std::string& manifest_path, const subsample_flags& flags) {
    const auto manifest = load_manifest(manifest_path);
    const auto base = apply_subsample_flags(ctx.base_subsample(), flags);
    const auto rules = ctx.overrides();
    const config_resolver resolve = [&](const layer_entry& e) {
        auto c = resolve_layer_config(base, rules, e.name);
        c.validate();
        return c;
    };
    return analyze_model(manifest, fs::path(manifest_path).parent_path(), resolve);
}

void log_failures(const context& ctx, const model_report& r) {
    for (const auto& f : r.failures) ctx.log(log_level::warn, "layer '" + f.layer + "' failed: " + f.message);
}

// ---- analyze -------------------------------------------------------------

struct analyze_cmd {
    std::string manifest;
    subsample_flags sub;
};

int do_analyze(context& ctx, const analyze_cmd& a) {
    const auto report = analyze_manifest(ctx, a.manifest, a.sub);
    log_failures(ctx, report);
    const auto cfg = apply_subsample_flags(ctx.base_subsample(), a.sub);
    ctx.emit("report", to_json(report, cfg), to_csv(report));
    return report.failures.empty() ? ok : partial;
}

// ---- allocators ----------------------------------------------------------

struct allocate_cmd {
    std::string manifest;
    std::string report;
    subsample_flags sub;
    // learning rate
    double eta = 0.1, s1 = 0.5, s2 = 1.5, temperature = 1.0;
    std::string mapping = "linear_minmax";
    bool no_ls = false;
    std::size_t min_esd = 32;
    double max_aspect = 5.0;
    bool keep_first_last = false;
    CLI::Option *eta_opt = nullptr, *s1_opt = nullptr, *s2_opt = nullptr, *temp_opt = nullptr,
                *mapping_opt = nullptr, *min_esd_opt = nullptr, *aspect_opt = nullptr;
    // sparsity
    double target = 0.7, tau = 0.1, clamp_lo = 0.0, clamp_hi = 0.99;
    bool unweighted = false;
    CLI::Option *target_opt = nullptr, *tau_opt = nullptr, *lo_opt = nullptr, *hi_opt = nullptr;
};

struct loaded_reports {
    std::vector<layer_report> layers;
    bool partial = false;
};

loaded_reports load_reports(const context& ctx, const allocate_cmd& a) {
    if (!a.report.empty() == !a.manifest.empty()) throw config_error("give exactly one of --report or --manifest");
    loaded_reports out;
    if (!a.report.empty()) {
        const auto r = model_report_from_json(read_json_file(a.report));
        out.layers = r.layers;
        out.partial = !r.failures.empty();
        return out;
    }
    const auto r = analyze_manifest(ctx, a.manifest, a.sub);
    log_failures(ctx, r);
    out.layers = r.layers;
    out.partial = !r.failures.empty();
    return out;
}

template <typename T>
T pick(const CLI::Option* opt, const T& flag_value, const json& section, const char* key, const T& fallback) {
    if (opt && opt->count()) return flag_value;
    if (section.contains(key)) return section[key].get<T>();
    return fallback;
}

int do_allocate_lr(context& ctx, const allocate_cmd& a) {
    const auto loaded = load_reports(ctx, a);
    const json& sec = ctx.section("lr");
    lr_schedule_config cfg;
    cfg.eta = pick(a.eta_opt, a.eta, sec, "eta", cfg.eta);
    cfg.s1 = pick(a.s1_opt, a.s1, sec, "s1", cfg.s1);
    cfg.s2 = pick(a.s2_opt, a.s2, sec, "s2", cfg.s2);
    cfg.temperature = pick(a.temp_opt, a.temperature, sec, "temperature", cfg.temperature);
    const auto mapping = pick<std::string>(a.mapping_opt, a.mapping, sec, "mapping", "linear_minmax");
    if (mapping == "sigmoid") {
        cfg.mapping = lr_mapping::sigmoid;
    } else if (mapping != "linear_minmax") {
        throw config_error("mapping must be linear_minmax or sigmoid");
    }
    const json& ls = ctx.section("ls");
    cfg.selection.enabled = a.no_ls ? false : ls.value("enabled", true);
    cfg.selection.exclude_first_last = a.keep_first_last ? false : ls.value("exclude_first_last", true);
    cfg.selection.min_esd_size = pick(a.min_esd_opt, a.min_esd, ls, "min_esd_size", cfg.selection.min_esd_size);
    cfg.selection.max_aspect_ratio =
        pick(a.aspect_opt, a.max_aspect, ls, "max_aspect_ratio", cfg.selection.max_aspect_ratio);

    const auto metric = ctx.metric();
    const auto selected = select_layers(loaded.layers, cfg.selection, metric);
    const auto result = assign_learning_rates(selected, cfg, metric);
    ctx.emit("allocation", to_json(result), to_csv(result));
    return loaded.partial ? partial : ok;
}

int do_allocate_sparsity(context& ctx, const allocate_cmd& a) {
    const auto loaded = load_reports(ctx, a);
    const json& sec = ctx.section("sparsity");
    sparsity_config cfg;
    cfg.target = pick(a.target_opt, a.target, sec, "target", cfg.target);
    cfg.tau = pick(a.tau_opt, a.tau, sec, "tau", cfg.tau);
    cfg.clamp_lo = pick(a.lo_opt, a.clamp_lo, sec, "clamp_lo", cfg.clamp_lo);
    cfg.clamp_hi = pick(a.hi_opt, a.clamp_hi, sec, "clamp_hi", cfg.clamp_hi);
    cfg.weight_by_params = a.unweighted ? false : sec.value("weight_by_params", true);

    // Pruning allocates to every layer; clear any flags carried by a report.
    auto layers = select_layers(loaded.layers, ls_config{.enabled = false});
    const auto metric = ctx.metric();
    try {
        const auto result = assign_sparsities(layers, cfg, metric);
        ctx.emit("allocation", to_json(result), to_csv(result));
    } catch (const infeasible_allocation& ex) {
        ctx.log(log_level::error, ex.what());
        ctx.emit("allocation", to_json(ex.result()), to_csv(ex.result()));
        return partial;
    }
    return loaded.partial ? partial : ok;
}

// ---- mp-check ------------------------------------------------------------

struct mp_cmd {
    std::size_t m = 1000, n = 4000, trials = 5, bins = 60, curve_points = 200;
    CLI::Option *m_opt = nullptr, *n_opt = nullptr, *trials_opt = nullptr, *bins_opt = nullptr,
                *curve_opt = nullptr;
};

int do_mp_check(context& ctx, const mp_cmd& c) {
    const json& sec = ctx.section("mp");
    const auto m = pick(c.m_opt, c.m, sec, "m", c.m);
    const auto n = pick(c.n_opt, c.n, sec, "n", c.n);
    const auto trials = pick(c.trials_opt, c.trials, sec, "trials", c.trials);
    const auto bins = pick(c.bins_opt, c.bins, sec, "bins", c.bins);
    const auto curve = pick(c.curve_opt, c.curve_points, sec, "curve_points", c.curve_points);
    if (m == 0 || n == 0 || trials == 0 || bins == 0 || curve == 0) {
        throw config_error("m, n, trials, bins and curve_points must be positive");
    }
    const std::uint64_t seed = ctx.seed();
    const double y = static_cast<double>(m) / static_cast<double>(n);
    const auto params = mp_parameters(y);

    // X is m x n with unit variance; the ESD of X X^T / n has m eigenvalues,
    // of which max(m - n, 0) sit in the atom at zero.
    std::vector<std::vector<double>> scaled(trials);
    std::vector<double> ks(trials);
    for (std::size_t t = 0; t < trials; ++t) {
        const auto x = gen_gaussian({m, n, variance_mode::unit, counter_rng(seed).derive(t).key()});
        const auto e = esd_of_matrix(x, "mp-check trial " + std::to_string(t));
        ks[t] = ks_distance_to_mp(e, y);
        scaled[t] = e.eigenvalues;
        for (double& v : scaled[t]) v /= static_cast<double>(n);
    }

    double hi = params.upper;
    for (const auto& s : scaled) {
        if (!s.empty()) hi = std::max(hi, s.back());
    }
    hi *= 1.05;
    const double width = hi / static_cast<double>(bins);
    std::vector<double> counts(bins, 0.0);
    std::size_t total = 0;
    for (const auto& s : scaled) {
        for (double v : s) {
            const auto b = std::min(bins - 1, static_cast<std::size_t>(v / width));
            counts[b] += 1.0;
        }
        total += m; // the atom counts toward the normalization
    }

    json j;
    j["metadata"] = json{{"m", m},
                         {"n", n},
                         {"y", round12(y)},
                         {"trials", trials},
                         {"seed", seed},
                         {"bins", bins},
                         {"lower_edge", round12(params.lower)},
                         {"upper_edge", round12(params.upper)},
                         {"atom_mass", round12(params.atom_mass)},
                         {"scaling", "eigenvalues of X X^T / n, X with unit-variance entries"},
                         {"histogram_normalization", "density of the continuous part; integrates to 1 - atom_mass"}};
    json ks_arr = json::array();
    for (double v : ks) ks_arr.push_back(round12(v));
    j["ks"] = ks_arr;
    j["ks_max"] = round12(*std::max_element(ks.begin(), ks.end()));

    std::ostringstream csv;
    csv << "bin_lo,bin_hi,density,mp_density_at_center\n";
    j["histogram"] = json::array();
    for (std::size_t b = 0; b < bins; ++b) {
        const double lo = width * static_cast<double>(b), up = lo + width;
        const double dens = counts[b] / (static_cast<double>(total) * width);
        const double mp = mp_density(0.5 * (lo + up), y).continuous;
        j["histogram"].push_back(json{{"lo", round12(lo)},
                                      {"hi", round12(up)},
                                      {"density", round12(dens)},
                                      {"mp_density", round12(mp)}});
        csv << format_number(lo) << ',' << format_number(up) << ',' << format_number(dens) << ','
            << format_number(mp) << '\n';
    }
    j["mp_curve"] = json::array();
    for (std::size_t i = 0; i < curve; ++i) {
        const double x = params.lower + (params.upper - params.lower) * (static_cast<double>(i) + 0.5) /
                                            static_cast<double>(curve);
        j["mp_curve"].push_back(json{{"x", round12(x)}, {"density", round12(mp_density(x, y).continuous)}});
    }
    ctx.emit("mp_check", j, csv.str());
    if (ctx.want_csv) {
        std::ostringstream kcsv;
        kcsv << "trial,ks\n";
        for (std::size_t t = 0; t < trials; ++t) kcsv << t << ',' << format_number(ks[t]) << '\n';
        write_text(ctx.out_dir / "mp_check_ks.csv", kcsv.str());
    }
    return ok;
}

// ---- bias-bench ----------------------------------------------------------

struct bias_cmd {
    std::string shapes = "100x100,200x100,512x100,1024x100";
    std::size_t trials = 20;
    subsample_flags sub;
    CLI::Option *shapes_opt = nullptr, *trials_opt = nullptr;
};

int do_bias_bench(context& ctx, const bias_cmd& c) {
    const json& sec = ctx.section("bias");
    std::vector<shape2> shapes = parse_shapes(c.shapes);
    if (!c.shapes_opt->count() && sec.contains("shapes")) {
        shapes.clear();
        for (const auto& s : sec["shapes"]) shapes.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
    }
    const auto trials = pick(c.trials_opt, c.trials, sec, "trials", c.trials);
    const auto cfg = apply_subsample_flags(ctx.base_subsample(), c.sub);
    const auto seed = ctx.seed();
    const auto result = bias_sweep(shapes, trials, cfg, seed);
    for (const auto& e : result.errors) ctx.log(log_level::warn, e);
    ctx.emit("bias_sweep", to_json(result, cfg, seed), to_csv(result));
    return result.errors.empty() ? ok : partial;
}

// ---- toy-align -----------------------------------------------------------

struct toy_cmd {
    std::string widths = "250,500,1000,2000";
    std::string activation_name = "relu";
    std::string correlation = "pearson";
    toy_config cfg;
    subsample_flags sub;
    CLI::Option *widths_opt = nullptr, *act_opt = nullptr, *dim_opt = nullptr, *seeds_opt = nullptr,
                *steps_opt = nullptr, *batch_opt = nullptr, *lr_opt = nullptr, *stride_opt = nullptr,
                *spike_opt = nullptr, *corr_opt = nullptr;
};

int do_toy_align(context& ctx, const toy_cmd& c) {
    const json& sec = ctx.section("toy");
    toy_config cfg;
    cfg.widths = parse_list(c.widths, "--widths");
    if (!c.widths_opt->count() && sec.contains("widths")) cfg.widths = sec["widths"].get<std::vector<std::size_t>>();
    const auto act = pick<std::string>(c.act_opt, c.activation_name, sec, "activation", "relu");
    if (act != "relu" && act != "tanh") throw config_error("activation must be relu or tanh");
    cfg.act = act == "tanh" ? activation::tanh : activation::relu;
    cfg.input_dim = pick(c.dim_opt, c.cfg.input_dim, sec, "input_dim", cfg.input_dim);
    cfg.seeds = pick(c.seeds_opt, c.cfg.seeds, sec, "seeds", cfg.seeds);
    cfg.steps = pick(c.steps_opt, c.cfg.steps, sec, "steps", cfg.steps);
    cfg.batch_size = pick(c.batch_opt, c.cfg.batch_size, sec, "batch_size", cfg.batch_size);
    cfg.learning_rate = pick(c.lr_opt, c.cfg.learning_rate, sec, "learning_rate", cfg.learning_rate);
    cfg.eval_stride = pick(c.stride_opt, c.cfg.eval_stride, sec, "eval_stride", cfg.eval_stride);
    cfg.init_spike = pick(c.spike_opt, c.cfg.init_spike, sec, "init_spike", cfg.init_spike);
    cfg.seed = ctx.seed();
    cfg.farms = apply_subsample_flags(ctx.base_subsample(), c.sub);
    const auto method = pick<std::string>(c.corr_opt, c.correlation, sec, "correlation", "pearson");
    if (method != "pearson" && method != "spearman") throw config_error("correlation must be pearson or spearman");
    cfg.validate();

    const auto result = toy_sweep(cfg);
    auto j = to_json(result, cfg);
    const auto& primary = method == "pearson" ? result.pearson_width_means : result.spearman_width_means;
    j["correlation"]["primary"] = json{{"method", method},
                                       {"over", "per-width means of best-checkpoint values"},
                                       {"baseline", round12(primary.baseline)},
                                       {"farms", round12(primary.farms)}};
    ctx.emit("toy_align", j, to_csv(result));
    return ok;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Heavy-tailed eigenspectrum analysis of weight matrices with fixed-aspect-ratio subsampling"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    context ctx;
    common_options co_an, co_lr, co_sp, co_mp, co_bias, co_toy;

    analyze_cmd an;
    auto* analyze = app.add_subcommand("analyze", "Per-layer baseline and FARMS alphas for a checkpoint");
    add_common(analyze, co_an);
    analyze->add_option("--manifest", an.manifest, "Checkpoint manifest.json")->required();
    add_subsample(analyze, an.sub);
    analyze->footer("Config file keys: subsample {...}, overrides {\"glob\": {...}}, out, format, threads.");

    allocate_cmd lr;
    auto* alr = app.add_subcommand("allocate-lr", "Layer-wise learning rates from alphas");
    add_common(alr, co_lr);
    add_metric(alr, co_lr);
    alr->add_option("--manifest", lr.manifest, "Checkpoint manifest.json to analyze first");
    alr->add_option("--report", lr.report, "Existing report.json from `analyze`");
    add_subsample(alr, lr.sub);
    lr.eta_opt = alr->add_option("--eta", lr.eta, "Global learning rate [config: lr.eta]");
    lr.s1_opt = alr->add_option("--s1", lr.s1, "Lower scale factor [config: lr.s1]");
    lr.s2_opt = alr->add_option("--s2", lr.s2, "Upper scale factor [config: lr.s2]");
    lr.mapping_opt = alr->add_option("--mapping", lr.mapping, "Alpha to rate map [config: lr.mapping]")
                         ->check(CLI::IsMember({"linear_minmax", "sigmoid"}));
    lr.temp_opt = alr->add_option("--temperature", lr.temperature, "Sigmoid temperature [config: lr.temperature]");
    alr->add_flag("--no-ls", lr.no_ls, "Disable layer selection [config: ls.enabled = false]");
    alr->add_flag("--keep-first-last", lr.keep_first_last,
                  "Do not exclude first and last layers [config: ls.exclude_first_last = false]");
    lr.min_esd_opt = alr->add_option("--min-esd-size", lr.min_esd,
                                     "Exclude layers with fewer eigenvalues [config: ls.min_esd_size]");
    lr.aspect_opt = alr->add_option("--max-aspect-ratio", lr.max_aspect,
                                    "Exclude tall-and-skinny layers, baseline metric only [config: ls.max_aspect_ratio]");

    allocate_cmd sp;
    auto* asp = app.add_subcommand("allocate-sparsity", "Layer-wise pruning ratios from alphas");
    add_common(asp, co_sp);
    add_metric(asp, co_sp);
    asp->add_option("--manifest", sp.manifest, "Checkpoint manifest.json to analyze first");
    asp->add_option("--report", sp.report, "Existing report.json from `analyze`");
    add_subsample(asp, sp.sub);
    sp.target_opt = asp->add_option("--target", sp.target, "Global sparsity S [config: sparsity.target]");
    sp.tau_opt = asp->add_option("--tau", sp.tau, "Half-width of the raw range [config: sparsity.tau]");
    sp.lo_opt = asp->add_option("--clamp-lo", sp.clamp_lo, "Lowest allowed ratio [config: sparsity.clamp_lo]");
    sp.hi_opt = asp->add_option("--clamp-hi", sp.clamp_hi, "Highest allowed ratio [config: sparsity.clamp_hi]");
    asp->add_flag("--unweighted", sp.unweighted,
                  "Plain mean instead of parameter-weighted [config: sparsity.weight_by_params = false]");
    asp->add_flag("--no-ls", sp.no_ls, "Accepted for symmetry; pruning never excludes layers");

    mp_cmd mp;
    auto* amp = app.add_subcommand("mp-check", "Gaussian ESD against the Marchenko-Pastur law");
    add_common(amp, co_mp);
    mp.m_opt = amp->add_option("--m", mp.m, "Rows of X; y = m/n [config: mp.m]");
    mp.n_opt = amp->add_option("--n", mp.n, "Columns of X [config: mp.n]");
    mp.trials_opt = amp->add_option("--trials", mp.trials, "Independent draws [config: mp.trials]");
    mp.bins_opt = amp->add_option("--bins", mp.bins, "Histogram bins [config: mp.bins]");
    mp.curve_opt = amp->add_option("--curve-points", mp.curve_points, "MP curve samples [config: mp.curve_points]");

    bias_cmd bias;
    auto* abias = app.add_subcommand("bias-bench", "Aspect-ratio bias sweep on He-initialized matrices");
    add_common(abias, co_bias);
    bias.shapes_opt = abias->add_option("--shapes", bias.shapes,
                                        "Comma-separated RxC shapes [config: bias.shapes = [[r, c], ...]]");
    bias.trials_opt = abias->add_option("--trials", bias.trials, "Trials per shape [config: bias.trials]");
    add_subsample(abias, bias.sub);

    toy_cmd toy;
    auto* atoy = app.add_subcommand("toy-align", "Teacher-student width sweep: alpha vs alignment");
    add_common(atoy, co_toy);
    toy.widths_opt = atoy->add_option("--widths", toy.widths, "Comma-separated hidden widths [config: toy.widths]");
    toy.dim_opt = atoy->add_option("--input-dim", toy.cfg.input_dim, "Input dimension [config: toy.input_dim]");
    toy.seeds_opt = atoy->add_option("--seeds", toy.cfg.seeds, "Runs per width [config: toy.seeds]");
    toy.steps_opt = atoy->add_option("--steps", toy.cfg.steps, "SGD steps [config: toy.steps]");
    toy.batch_opt = atoy->add_option("--batch-size", toy.cfg.batch_size, "Samples per step [config: toy.batch_size]");
    toy.lr_opt = atoy->add_option("--lr", toy.cfg.learning_rate, "SGD learning rate [config: toy.learning_rate]");
    toy.stride_opt = atoy->add_option("--eval-stride", toy.cfg.eval_stride,
                                      "Steps between checkpoints [config: toy.eval_stride]");
    toy.spike_opt = atoy->add_option("--init-spike", toy.cfg.init_spike,
                                     "Teacher-direction spike added at init [config: toy.init_spike]");
    toy.act_opt = atoy->add_option("--activation", toy.activation_name, "Teacher and student nonlinearity "
                                                                        "[config: toy.activation]")
                      ->check(CLI::IsMember({"relu", "tanh"}));
    toy.corr_opt = atoy->add_option("--correlation", toy.correlation, "Headline correlation [config: toy.correlation]")
                       ->check(CLI::IsMember({"pearson", "spearman"}));
    // The window flags would clash with --steps, so only the Hill knobs are exposed here.
    toy.sub.q_opt = atoy->add_option("--q-ratio", toy.sub.q_ratio, "Window aspect ratio [config: subsample.q_ratio]");
    toy.sub.window_opt = atoy->add_option("--window", toy.sub.window, "Window, as for analyze [config: subsample.window]");
    toy.sub.steps_opt = atoy->add_option("--window-steps", toy.sub.steps, "Window steps [config: subsample.steps]");
    toy.sub.agg_opt = atoy->add_option("--conv-aggregation", toy.sub.aggregation, "Unused for dense layers");
    toy.sub.k_opt = atoy->add_option("--k", toy.sub.k, "Fixed Hill tail size [config: subsample.hill]");
    toy.sub.frac_opt = atoy->add_option("--k-fraction", toy.sub.k_fraction, "Hill tail fraction [config: subsample.hill]");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? ok : fatal;
    }

    try {
        const std::pair<CLI::App*, common_options*> chosen[] = {{analyze, &co_an}, {alr, &co_lr}, {asp, &co_sp},
                                                                {amp, &co_mp},   {abias, &co_bias}, {atoy, &co_toy}};
        for (const auto& [sub, co] : chosen) {
            if (*sub) ctx.common = *co;
        }
        prepare(ctx, err);
        if (*analyze) return do_analyze(ctx, an);
        if (*alr) return do_allocate_lr(ctx, lr);
        if (*asp) return do_allocate_sparsity(ctx, sp);
        if (*amp) return do_mp_check(ctx, mp);
        if (*abias) return do_bias_bench(ctx, bias);
        if (*atoy) return do_toy_align(ctx, toy);
    } catch (const std::exception& ex) {
        err << "farms: error: " << ex.what() << '\n';
        return fatal;
    }
    return fatal;
}

} // namespace farms::cli
