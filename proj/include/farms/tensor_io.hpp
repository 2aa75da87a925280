#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace farms {

enum class layer_kind { linear, conv2d };
enum class dtype { f32, f64 };

std::string to_string(layer_kind k);
std::string to_string(dtype t);
std::size_t dtype_size(dtype t);

struct layer_entry {
    std::string name;
    layer_kind kind = layer_kind::linear;
    std::vector<std::int64_t> shape; // [m, n] or [C1, C2, kH, kW]
    dtype type = dtype::f32;
    std::string blob;
    std::uint64_t offset = 0;

    std::uint64_t element_count() const;
};

struct model_manifest {
    std::string model_name;
    std::vector<layer_entry> layers;
};

/// Dense row-major tensor widened to f64. Conv tensors keep the
/// (C1, C2, kH, kW) index order, outermost first.
struct weight_tensor {
    layer_entry entry;
    std::vector<double> data;

    std::int64_t rows() const { return entry.shape.at(0); }
    std::int64_t cols() const { return entry.shape.at(1); }
};

struct load_options {
    std::uint64_t max_elements = std::uint64_t{1} << 28;
};

/// Checks the per-entry invariants; throws schema_error naming the layer.
void validate_entry(const layer_entry& e);

model_manifest load_manifest(const std::filesystem::path& path);
model_manifest parse_manifest(const std::string& json_text);

weight_tensor load_tensor(const std::filesystem::path& manifest_dir, const layer_entry& entry,
                          const load_options& opts = {});

/// Little-endian decode of a raw blob slice; exposed for fuzz-style tests.
std::vector<double> decode_le(std::span<const std::byte> bytes, dtype t);
std::vector<std::byte> encode_le(std::span<const double> values, dtype t);

struct checkpoint_layer {
    std::string name;
    layer_kind kind = layer_kind::linear;
    std::vector<std::int64_t> shape;
    std::vector<double> data;
};

/// Writes `manifest.json` plus a single blob file into `dir`. Layers are laid
/// out back to back in the blob in the order given.
model_manifest write_checkpoint(const std::filesystem::path& dir, const std::string& model_name,
                                const std::vector<checkpoint_layer>& layers, dtype type = dtype::f64,
                                const std::string& blob_name = "weights.bin");

std::string manifest_to_json(const model_manifest& m);

} // namespace farms
