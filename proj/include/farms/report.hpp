#pragma once

#include "farms/allocators.hpp"
#include "farms/sampler.hpp"
#include "farms/synth.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace farms {

using json = nlohmann::ordered_json;

/// Rounds to 12 significant digits; the JSON writer then prints the
/// shortest representation of the rounded value.
double round12(double v);
std::string format_number(double v);

json to_json(const hill_config& c);
json to_json(const subsample_config& c);
/// Applies the keys present in `j` on top of `base`.
subsample_config apply_subsample_json(subsample_config base, const json& j);
hill_config apply_hill_json(hill_config base, const json& j);

/// Glob pattern (fnmatch syntax) -> partial subsample config.
struct override_rule {
    std::string pattern;
    json patch;
};

/// First matching rule wins; rules keep their file order.
subsample_config resolve_layer_config(const subsample_config& base, const std::vector<override_rule>& rules,
                                      const std::string& layer_name);
std::vector<override_rule> parse_overrides(const json& j);

json to_json(const layer_report& r);
json to_json(const model_report& r, const subsample_config& cfg);
model_report model_report_from_json(const json& j);
std::string to_csv(const model_report& r);

json to_json(const allocation_result& r);
std::string to_csv(const allocation_result& r);

json to_json(const bias_sweep_result& r, const subsample_config& cfg, std::uint64_t seed);
std::string to_csv(const bias_sweep_result& r);

json to_json(const toy_sweep_result& r, const toy_config& cfg);
std::string to_csv(const toy_sweep_result& r);

std::string dump(const json& j);
void write_text(const std::filesystem::path& path, const std::string& text);
json read_json_file(const std::filesystem::path& path);

std::string csv_escape(const std::string& s);

} // namespace farms
