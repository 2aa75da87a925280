#pragma once

#include "farms/spectral.hpp"
#include "farms/tensor_io.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace farms {

enum class window_mode { min_dimension, explicit_size };
enum class step_mode { automatic, grid };
enum class conv_aggregation { average_per_block, concatenate_all };

struct subsample_config {
    double q_ratio = 1.0;
    window_mode window = window_mode::min_dimension;
    std::size_t window_rows = 0; // explicit_size only
    std::size_t window_cols = 0;
    step_mode steps = step_mode::automatic;
    std::size_t row_steps = 1; // grid only
    std::size_t col_steps = 1;
    conv_aggregation aggregation = conv_aggregation::average_per_block;
    bool clamp_window = true;
    hill_config hill;

    void validate() const;
};

struct offset {
    std::size_t row = 0;
    std::size_t col = 0;
    auto operator<=>(const offset&) const = default;
};

struct subsample_plan {
    std::size_t window_rows = 0;
    std::size_t window_cols = 0;
    std::vector<offset> offsets; // unique, row-major sorted
    bool covers_full_matrix = false;
    // False when the window had to be clamped and no longer has ratio Q.
    bool aspect_preserved = true;
    bool clamped = false;
};

subsample_plan plan_subsamples(std::size_t rows, std::size_t cols, const subsample_config& cfg);

/// Evenly spaced window starts along one axis: the first at 0, the last
/// pinned at dim - window, interior strides rounded to nearest.
std::vector<std::size_t> axis_offsets(std::size_t dim, std::size_t window, std::size_t count);

/// Concatenated ESD over all planned windows. The matrix is transposed first
/// when it has fewer rows than columns.
esd farms_esd_linear(const Eigen::Ref<const Eigen::MatrixXd>& m, const subsample_config& cfg);
double farms_alpha_linear(const Eigen::Ref<const Eigen::MatrixXd>& m, const subsample_config& cfg);

/// View of a row-major [C1, C2, kH, kW] tensor.
struct conv_view {
    std::span<const double> data;
    std::size_t c1 = 0, c2 = 0, kh = 0, kw = 0;

    std::size_t slices() const { return kh * kw; }
    /// C1 x C2 matrix for kernel position s = h * kW + w.
    Eigen::MatrixXd slice(std::size_t s) const;
};

struct conv_result {
    double alpha = 0.0;
    std::vector<double> block_alphas; // empty for concatenate_all
    std::size_t block_count = 0;
    std::size_t esd_size = 0;
    std::size_t submatrix_count = 0;
};

conv_result farms_conv(const conv_view& t, const subsample_config& cfg);
double farms_alpha_conv(const conv_view& t, const subsample_config& cfg);

/// Whole-slice ESDs concatenated across every kernel position.
esd baseline_esd_conv(const conv_view& t);

struct layer_report {
    std::string name;
    layer_kind kind = layer_kind::linear;
    std::vector<std::int64_t> shape;
    double baseline_alpha = 0.0;
    double farms_alpha = 0.0;
    std::size_t esd_size_baseline = 0;
    std::size_t esd_size_farms = 0;
    std::size_t submatrix_count = 0;
    bool excluded = false;
    std::string reason;

    /// Rows and columns of the analyzed matrix (C1 x C2 for conv).
    std::pair<std::size_t, std::size_t> matrix_dims() const;
    std::size_t parameter_count() const;
};

/// Returns a non-empty reason when the layer should be excluded.
using layer_predicate = std::function<std::optional<std::string>(const layer_report&)>;

layer_report analyze_layer(const weight_tensor& t, const subsample_config& cfg,
                           const layer_predicate& exclude = {});

struct metric_summary {
    double mean = 0.0;
    double stddev = 0.0; // population
};

struct model_summary {
    std::size_t count = 0; // non-excluded layers contributing
    std::optional<metric_summary> baseline;
    std::optional<metric_summary> farms;
};

struct layer_failure {
    std::size_t index = 0;
    std::string layer;
    std::string message;
};

struct model_report {
    std::string model_name;
    std::vector<layer_report> layers;
    std::vector<layer_failure> failures;
    model_summary summary;
};

/// Per-layer config resolution, e.g. glob-pattern overrides.
using config_resolver = std::function<subsample_config(const layer_entry&)>;

model_summary summarize(const std::vector<layer_report>& layers);

/// Loads and analyzes every layer in manifest order. Layer failures are
/// collected and the scan continues.
model_report analyze_model(const model_manifest& manifest, const std::filesystem::path& manifest_dir,
                           const config_resolver& resolve, const load_options& opts = {},
                           const layer_predicate& exclude = {});

model_report analyze_model(const model_manifest& manifest, const std::filesystem::path& manifest_dir,
                           const subsample_config& cfg, const load_options& opts = {});

/// Same as analyze_model for tensors already in memory.
model_report analyze_tensors(const std::string& model_name, const std::vector<weight_tensor>& tensors,
                             const config_resolver& resolve, const layer_predicate& exclude = {});

} // namespace farms
