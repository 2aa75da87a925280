#include "farms/report.hpp"

#include "farms/error.hpp"

#include <fnmatch.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace farms {

double round12(double v) {
    if (!std::isfinite(v)) return v;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return std::strtod(buf, nullptr);
}

std::string format_number(double v) {
    if (!std::isfinite(v)) return "";
    return json(round12(v)).dump();
}

namespace {

json num(double v) { return std::isfinite(v) ? json(round12(v)) : json(nullptr); }

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key) || j[key].is_null()) return fallback;
    try {
        return j[key].get<T>();
    } catch (const nlohmann::json::exception&) {
        throw schema_error(std::string("config key '") + key + "' has the wrong type");
    }
}

std::string shape_string(const std::vector<std::int64_t>& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out;
}

} // namespace

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

json to_json(const hill_config& c) {
    json j;
    if (c.k_mode == hill_config::mode::fixed) {
        j["k_mode"] = "fixed";
        j["k"] = c.fixed_k;
    } else {
        j["k_mode"] = "fraction";
        j["fraction"] = num(c.fraction);
    }
    j["eps_relative"] = num(c.eps_relative);
    return j;
}

hill_config apply_hill_json(hill_config base, const json& j) {
    if (!j.is_object()) throw schema_error("hill config must be an object");
    if (j.contains("k_mode")) {
        const auto mode = j["k_mode"].get<std::string>();
        if (mode == "fixed") {
            base.k_mode = hill_config::mode::fixed;
        } else if (mode == "fraction") {
            base.k_mode = hill_config::mode::fraction;
        } else {
            throw schema_error("hill.k_mode must be 'fixed' or 'fraction'");
        }
    }
    base.fixed_k = get_or<std::size_t>(j, "k", base.fixed_k);
    base.fraction = get_or<double>(j, "fraction", base.fraction);
    base.eps_relative = get_or<double>(j, "eps_relative", base.eps_relative);
    return base;
}

json to_json(const subsample_config& c) {
    json j;
    j["q_ratio"] = num(c.q_ratio);
    if (c.window == window_mode::min_dimension) {
        j["window"] = "min_dimension";
    } else {
        j["window"] = json{{"rows", c.window_rows}, {"cols", c.window_cols}};
    }
    if (c.steps == step_mode::automatic) {
        j["steps"] = "auto";
    } else {
        j["steps"] = json{{"rows", c.row_steps}, {"cols", c.col_steps}};
    }
    j["conv_aggregation"] =
        c.aggregation == conv_aggregation::average_per_block ? "average_per_block" : "concatenate_all";
    j["clamp_window"] = c.clamp_window;
    j["hill"] = to_json(c.hill);
    return j;
}

subsample_config apply_subsample_json(subsample_config base, const json& j) {
    if (!j.is_object()) throw schema_error("subsample config must be an object");
    base.q_ratio = get_or<double>(j, "q_ratio", base.q_ratio);
    if (j.contains("window")) {
        const auto& w = j["window"];
        if (w.is_string() && w.get<std::string>() == "min_dimension") {
            base.window = window_mode::min_dimension;
        } else if (w.is_object()) {
            base.window = window_mode::explicit_size;
            base.window_rows = get_or<std::size_t>(w, "rows", base.window_rows);
            base.window_cols = get_or<std::size_t>(w, "cols", base.window_cols);
        } else if (w.is_number_unsigned()) {
            base.window = window_mode::explicit_size;
            base.window_rows = w.get<std::size_t>();
            base.window_cols = static_cast<std::size_t>(
                std::llround(static_cast<double>(base.window_rows) / base.q_ratio));
        } else {
            throw schema_error("window must be 'min_dimension', a size, or {rows, cols}");
        }
    }
    if (j.contains("steps")) {
        const auto& s = j["steps"];
        if (s.is_string() && s.get<std::string>() == "auto") {
            base.steps = step_mode::automatic;
        } else if (s.is_object()) {
            base.steps = step_mode::grid;
            base.row_steps = get_or<std::size_t>(s, "rows", base.row_steps);
            base.col_steps = get_or<std::size_t>(s, "cols", base.col_steps);
        } else if (s.is_array() && s.size() == 2) {
            base.steps = step_mode::grid;
            base.row_steps = s[0].get<std::size_t>();
            base.col_steps = s[1].get<std::size_t>();
        } else {
            throw schema_error("steps must be 'auto', [rows, cols], or {rows, cols}");
        }
    }
    if (j.contains("conv_aggregation")) {
        const auto a = j["conv_aggregation"].get<std::string>();
        if (a == "average_per_block") {
            base.aggregation = conv_aggregation::average_per_block;
        } else if (a == "concatenate_all") {
            base.aggregation = conv_aggregation::concatenate_all;
        } else {
            throw schema_error("conv_aggregation must be 'average_per_block' or 'concatenate_all'");
        }
    }
    base.clamp_window = get_or<bool>(j, "clamp_window", base.clamp_window);
    if (j.contains("hill")) base.hill = apply_hill_json(base.hill, j["hill"]);
    return base;
}

std::vector<override_rule> parse_overrides(const json& j) {
    std::vector<override_rule> rules;
    if (j.is_null()) return rules;
    if (!j.is_object()) throw schema_error("overrides must be an object mapping glob patterns to configs");
    for (const auto& [pattern, patch] : j.items()) {
        if (!patch.is_object()) throw schema_error("override for '" + pattern + "' must be an object");
        rules.push_back({pattern, patch});
    }
    return rules;
}

subsample_config resolve_layer_config(const subsample_config& base, const std::vector<override_rule>& rules,
                                      const std::string& layer_name) {
    for (const auto& r : rules) {
        if (::fnmatch(r.pattern.c_str(), layer_name.c_str(), 0) == 0) return apply_subsample_json(base, r.patch);
    }
    return base;
}

json to_json(const layer_report& r) {
    json j;
    j["name"] = r.name;
    j["kind"] = to_string(r.kind);
    j["shape"] = r.shape;
    j["baseline_alpha"] = num(r.baseline_alpha);
    j["farms_alpha"] = num(r.farms_alpha);
    j["esd_size_baseline"] = r.esd_size_baseline;
    j["esd_size_farms"] = r.esd_size_farms;
    j["submatrix_count"] = r.submatrix_count;
    j["excluded"] = r.excluded;
    j["reason"] = r.reason;
    return j;
}

namespace {

json summary_json(const std::optional<metric_summary>& s) {
    if (!s) return nullptr;
    return json{{"mean", num(s->mean)}, {"std", num(s->stddev)}};
}

} // namespace

json to_json(const model_report& r, const subsample_config& cfg) {
    json j;
    j["model_name"] = r.model_name;
    j["config"] = to_json(cfg);
    j["layers"] = json::array();
    for (const auto& l : r.layers) j["layers"].push_back(to_json(l));
    j["errors"] = json::array();
    for (const auto& f : r.failures) {
        j["errors"].push_back(json{{"index", f.index}, {"layer", f.layer}, {"message", f.message}});
    }
    j["summary"] = json{{"count", r.summary.count},
                        {"defined", r.summary.count > 0},
                        {"baseline", summary_json(r.summary.baseline)},
                        {"farms", summary_json(r.summary.farms)}};
    return j;
}

model_report model_report_from_json(const json& j) {
    if (!j.is_object() || !j.contains("layers")) throw schema_error("report JSON must contain 'layers'");
    model_report r;
    r.model_name = get_or<std::string>(j, "model_name", "");
    for (const auto& l : j["layers"]) {
        layer_report lr;
        lr.name = l.at("name").get<std::string>();
        lr.kind = l.at("kind").get<std::string>() == "conv2d" ? layer_kind::conv2d : layer_kind::linear;
        lr.shape = l.at("shape").get<std::vector<std::int64_t>>();
        lr.baseline_alpha = l.at("baseline_alpha").get<double>();
        lr.farms_alpha = l.at("farms_alpha").get<double>();
        lr.esd_size_baseline = get_or<std::size_t>(l, "esd_size_baseline", 0);
        lr.esd_size_farms = get_or<std::size_t>(l, "esd_size_farms", 0);
        lr.submatrix_count = get_or<std::size_t>(l, "submatrix_count", 0);
        lr.excluded = get_or<bool>(l, "excluded", false);
        lr.reason = get_or<std::string>(l, "reason", "");
        r.layers.push_back(std::move(lr));
    }
    if (j.contains("errors")) {
        for (const auto& e : j["errors"]) {
            r.failures.push_back({get_or<std::size_t>(e, "index", 0), get_or<std::string>(e, "layer", ""),
                                  get_or<std::string>(e, "message", "")});
        }
    }
    r.summary = summarize(r.layers);
    return r;
}

std::string to_csv(const model_report& r) {
    std::ostringstream os;
    os << "layer,kind,shape,alpha_baseline,alpha_farms,esd_size_baseline,esd_size_farms,submatrix_count,excluded,"
          "reason\n";
    for (const auto& l : r.layers) {
        os << csv_escape(l.name) << ',' << to_string(l.kind) << ',' << shape_string(l.shape) << ','
           << format_number(l.baseline_alpha) << ',' << format_number(l.farms_alpha) << ',' << l.esd_size_baseline
           << ',' << l.esd_size_farms << ',' << l.submatrix_count << ',' << (l.excluded ? "true" : "false") << ','
           << csv_escape(l.reason) << '\n';
    }
    for (const auto& f : r.failures) {
        os << csv_escape(f.layer) << ",error,,,,,,,," << csv_escape(f.message) << '\n';
    }
    if (r.summary.baseline && r.summary.farms) {
        os << "summary:mean,,,"
           << format_number(r.summary.baseline->mean) << ',' << format_number(r.summary.farms->mean) << ",,,,,\n";
        os << "summary:std,,," << format_number(r.summary.baseline->stddev) << ','
           << format_number(r.summary.farms->stddev) << ",,,,,\n";
    }
    return os.str();
}

json to_json(const allocation_result& r) {
    json j;
    j["metric"] = to_string(r.metric);
    j["per_layer"] = json::array();
    for (const auto& e : r.per_layer) {
        j["per_layer"].push_back(json{{"layer", e.name},
                                      {"alpha_baseline", num(e.alpha_baseline)},
                                      {"alpha_farms", num(e.alpha_farms)},
                                      {"value", num(e.value)},
                                      {"excluded", e.excluded},
                                      {"reason", e.reason}});
    }
    const auto& c = r.constraints;
    j["constraint_report"] = json{{"kind", c.kind},         {"target", num(c.target)},
                                  {"achieved_mean", num(c.achieved)}, {"lower", num(c.lower)},
                                  {"upper", num(c.upper)},   {"iterations", c.iterations},
                                  {"feasible", c.feasible}};
    return j;
}

std::string to_csv(const allocation_result& r) {
    std::ostringstream os;
    os << "layer,alpha_baseline,alpha_farms,value,excluded,reason\n";
    for (const auto& e : r.per_layer) {
        os << csv_escape(e.name) << ',' << format_number(e.alpha_baseline) << ',' << format_number(e.alpha_farms)
           << ',' << format_number(e.value) << ',' << (e.excluded ? "true" : "false") << ',' << csv_escape(e.reason)
           << '\n';
    }
    return os.str();
}

json to_json(const bias_sweep_result& r, const subsample_config& cfg, std::uint64_t seed) {
    json j;
    j["seed"] = seed;
    j["config"] = to_json(cfg);
    j["rows"] = json::array();
    for (const auto& row : r.rows) {
        json a = json::array(), b = json::array();
        for (double v : row.baseline_alphas) a.push_back(num(v));
        for (double v : row.farms_alphas) b.push_back(num(v));
        j["rows"].push_back(json{{"rows", row.shape.rows},
                                 {"cols", row.shape.cols},
                                 {"trials", row.trials},
                                 {"failed", row.failed},
                                 {"baseline_mean", num(row.baseline_mean)},
                                 {"baseline_std", num(row.baseline_std)},
                                 {"farms_mean", num(row.farms_mean)},
                                 {"farms_std", num(row.farms_std)},
                                 {"baseline_alphas", a},
                                 {"farms_alphas", b}});
    }
    j["baseline_range"] = num(r.baseline_range);
    j["farms_range"] = num(r.farms_range);
    j["errors"] = r.errors;
    return j;
}

std::string to_csv(const bias_sweep_result& r) {
    std::ostringstream os;
    os << "rows,cols,trials,failed,baseline_mean,baseline_std,farms_mean,farms_std\n";
    for (const auto& row : r.rows) {
        os << row.shape.rows << ',' << row.shape.cols << ',' << row.trials << ',' << row.failed << ','
           << format_number(row.baseline_mean) << ',' << format_number(row.baseline_std) << ','
           << format_number(row.farms_mean) << ',' << format_number(row.farms_std) << '\n';
    }
    return os.str();
}

namespace {

json checkpoint_json(const toy_checkpoint& c) {
    json j{{"step", c.step}, {"alignment", num(c.alignment)}};
    if (c.baseline_alpha != 0.0 || c.farms_alpha != 0.0) {
        j["baseline_alpha"] = num(c.baseline_alpha);
        j["farms_alpha"] = num(c.farms_alpha);
    }
    return j;
}

json pair_json(const correlation_pair& p) { return json{{"baseline", num(p.baseline)}, {"farms", num(p.farms)}}; }

} // namespace

json to_json(const toy_sweep_result& r, const toy_config& cfg) {
    json j;
    json widths = json::array();
    for (auto w : cfg.widths) widths.push_back(w);
    j["config"] = json{{"input_dim", cfg.input_dim},
                       {"widths", widths},
                       {"seeds", cfg.seeds},
                       {"seed", cfg.seed},
                       {"activation", cfg.act == activation::relu ? "relu" : "tanh"},
                       {"steps", cfg.steps},
                       {"batch_size", cfg.batch_size},
                       {"learning_rate", num(cfg.learning_rate)},
                       {"eval_stride", cfg.eval_stride},
                       {"init_spike", num(cfg.init_spike)},
                       {"second_layer", "frozen random signs, output scaled by 1/sqrt(width)"},
                       {"first_layer_init", "N(0, 1/input_dim)"},
                       {"loss", "squared error, SGD on first layer only"},
                       {"farms", to_json(cfg.farms)}};
    j["runs"] = json::array();
    for (const auto& run : r.runs) {
        json cps = json::array();
        for (const auto& c : run.checkpoints) cps.push_back(checkpoint_json(c));
        j["runs"].push_back(json{{"width", run.width},
                                 {"seed_index", run.seed_index},
                                 {"best", checkpoint_json(run.best)},
                                 {"final_loss", num(run.final_loss)},
                                 {"checkpoints", cps}});
    }
    j["per_width"] = json::array();
    for (const auto& s : r.per_width) {
        j["per_width"].push_back(json{{"width", s.width},
                                      {"alignment", num(s.alignment)},
                                      {"baseline_alpha", num(s.baseline_alpha)},
                                      {"farms_alpha", num(s.farms_alpha)}});
    }
    j["correlation"] = json{{"pearson_width_means", pair_json(r.pearson_width_means)},
                            {"pearson_pooled", pair_json(r.pearson_pooled)},
                            {"spearman_width_means", pair_json(r.spearman_width_means)}};
    return j;
}

std::string to_csv(const toy_sweep_result& r) {
    std::ostringstream os;
    os << "width,seed_index,best_step,alignment,baseline_alpha,farms_alpha\n";
    for (const auto& run : r.runs) {
        os << run.width << ',' << run.seed_index << ',' << run.best.step << ',' << format_number(run.best.alignment)
           << ',' << format_number(run.best.baseline_alpha) << ',' << format_number(run.best.farms_alpha) << '\n';
    }
    for (const auto& s : r.per_width) {
        os << s.width << ",mean,," << format_number(s.alignment) << ',' << format_number(s.baseline_alpha) << ','
           << format_number(s.farms_alpha) << '\n';
    }
    return os.str();
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write " + path.string());
    out << text;
    if (!out) throw io_error("write failed for " + path.string());
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const nlohmann::json::parse_error& ex) {
        throw schema_error("malformed JSON in " + path.string() + ": " + ex.what());
    }
}

} // namespace farms
