#include "farms/error.hpp"
#include "farms/sampler.hpp"
#include "parallel.hpp"

#include <cmath>
#include <exception>

namespace farms {

std::pair<std::size_t, std::size_t> layer_report::matrix_dims() const {
    if (shape.size() < 2) return {0, 0};
    return {static_cast<std::size_t>(shape[0]), static_cast<std::size_t>(shape[1])};
}

std::size_t layer_report::parameter_count() const {
    std::size_t n = 1;
    for (auto d : shape) n *= static_cast<std::size_t>(d);
    return shape.empty() ? 0 : n;
}

namespace {

conv_view view_of(const weight_tensor& t) {
    const auto& s = t.entry.shape;
    return conv_view{t.data, static_cast<std::size_t>(s[0]), static_cast<std::size_t>(s[1]),
                     static_cast<std::size_t>(s[2]), static_cast<std::size_t>(s[3])};
}

} // namespace

layer_report analyze_layer(const weight_tensor& t, const subsample_config& cfg, const layer_predicate& exclude) {
    validate_entry(t.entry);
    if (t.data.size() != t.entry.element_count()) {
        throw data_error("layer '" + t.entry.name + "': data size does not match shape");
    }
    cfg.validate();

    layer_report r;
    r.name = t.entry.name;
    r.kind = t.entry.kind;
    r.shape = t.entry.shape;

    if (t.entry.kind == layer_kind::linear) {
        const matrix_view view(t.data.data(), t.rows(), t.cols());
        const Eigen::MatrixXd m = view;
        const esd base = esd_of_matrix(m, "(layer '" + t.entry.name + "')");
        r.baseline_alpha = hill_alpha(base, cfg.hill);
        r.esd_size_baseline = base.size();
        const esd sampled = farms_esd_linear(m, cfg);
        r.farms_alpha = hill_alpha(sampled, cfg.hill);
        r.esd_size_farms = sampled.size();
        r.submatrix_count = sampled.source_count;
    } else {
        const auto view = view_of(t);
        const esd base = baseline_esd_conv(view);
        r.baseline_alpha = hill_alpha(base, cfg.hill);
        r.esd_size_baseline = base.size();
        const auto res = farms_conv(view, cfg);
        r.farms_alpha = res.alpha;
        r.esd_size_farms = res.esd_size;
        r.submatrix_count = res.submatrix_count;
    }

    if (exclude) {
        if (auto why = exclude(r)) {
            r.excluded = true;
            r.reason = *why;
        }
    }
    return r;
}

model_summary summarize(const std::vector<layer_report>& layers) {
    model_summary s;
    double sb = 0.0, sf = 0.0;
    for (const auto& l : layers) {
        if (l.excluded) continue;
        ++s.count;
        sb += l.baseline_alpha;
        sf += l.farms_alpha;
    }
    if (s.count == 0) return s;
    const double n = static_cast<double>(s.count);
    const double mb = sb / n, mf = sf / n;
    double vb = 0.0, vf = 0.0;
    for (const auto& l : layers) {
        if (l.excluded) continue;
        vb += (l.baseline_alpha - mb) * (l.baseline_alpha - mb);
        vf += (l.farms_alpha - mf) * (l.farms_alpha - mf);
    }
    s.baseline = metric_summary{mb, std::sqrt(vb / n)};
    s.farms = metric_summary{mf, std::sqrt(vf / n)};
    return s;
}

namespace {

template <typename Analyze>
model_report run_layers(const std::string& model_name, std::size_t count, const Analyze& analyze,
                        const std::vector<std::string>& names) {
    std::vector<std::optional<layer_report>> slots(count);
    std::vector<std::string> messages(count);
#pragma omp parallel for schedule(dynamic) if (detail::run_parallel(count))
    for (std::size_t i = 0; i < count; ++i) {
        try {
            slots[i] = analyze(i);
        } catch (const std::exception& ex) {
            messages[i] = ex.what();
        } catch (...) {
            messages[i] = "unknown error";
        }
    }
    model_report out;
    out.model_name = model_name;
    for (std::size_t i = 0; i < count; ++i) {
        if (slots[i]) {
            out.layers.push_back(std::move(*slots[i]));
        } else {
            out.failures.push_back({i, names[i], messages[i]});
        }
    }
    out.summary = summarize(out.layers);
    return out;
}

} // namespace

model_report analyze_model(const model_manifest& manifest, const std::filesystem::path& manifest_dir,
                           const config_resolver& resolve, const load_options& opts,
                           const layer_predicate& exclude) {
    std::vector<std::string> names;
    for (const auto& l : manifest.layers) names.push_back(l.name);
    return run_layers(
        manifest.model_name, manifest.layers.size(),
        [&](std::size_t i) {
            const auto& entry = manifest.layers[i];
            const auto t = load_tensor(manifest_dir, entry, opts);
            return analyze_layer(t, resolve ? resolve(entry) : subsample_config{}, exclude);
        },
        names);
}

model_report analyze_model(const model_manifest& manifest, const std::filesystem::path& manifest_dir,
                           const subsample_config& cfg, const load_options& opts) {
    return analyze_model(manifest, manifest_dir, [&](const layer_entry&) { return cfg; }, opts);
}

model_report analyze_tensors(const std::string& model_name, const std::vector<weight_tensor>& tensors,
                             const config_resolver& resolve, const layer_predicate& exclude) {
    std::vector<std::string> names;
    for (const auto& t : tensors) names.push_back(t.entry.name);
    return run_layers(
        model_name, tensors.size(),
        [&](std::size_t i) {
            return analyze_layer(tensors[i], resolve ? resolve(tensors[i].entry) : subsample_config{}, exclude);
        },
        names);
}

} // namespace farms
