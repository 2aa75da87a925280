#include "farms/tensor_io.hpp"

#include "farms/error.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace farms {

namespace {

using json = nlohmann::ordered_json;

std::string layer_label(std::size_t index, const std::string& name) {
    std::ostringstream os;
    os << "layer " << index;
    if (!name.empty()) os << " ('" << name << "')";
    return os.str();
}

template <typename T>
T require(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) throw schema_error(where + ": missing key '" + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw schema_error(where + ": key '" + key + "' has the wrong type");
    }
}

layer_kind parse_kind(const std::string& s, const std::string& where) {
    if (s == "linear") return layer_kind::linear;
    if (s == "conv2d") return layer_kind::conv2d;
    throw schema_error(where + ": unknown kind '" + s + "'");
}

dtype parse_dtype(const std::string& s, const std::string& where) {
    if (s == "f32") return dtype::f32;
    if (s == "f64") return dtype::f64;
    throw schema_error(where + ": unsupported dtype '" + s + "'");
}

} // namespace

std::string to_string(layer_kind k) { return k == layer_kind::linear ? "linear" : "conv2d"; }
std::string to_string(dtype t) { return t == dtype::f32 ? "f32" : "f64"; }
std::size_t dtype_size(dtype t) { return t == dtype::f32 ? 4 : 8; }

std::uint64_t layer_entry::element_count() const {
    std::uint64_t n = 1;
    for (auto d : shape) n *= static_cast<std::uint64_t>(d);
    return n;
}

void validate_entry(const layer_entry& e) {
    const std::string where = "layer '" + e.name + "'";
    if (e.name.empty()) throw schema_error("layer with empty name");
    const std::size_t want = e.kind == layer_kind::linear ? 2 : 4;
    if (e.shape.size() != want) {
        throw schema_error(where + ": " + to_string(e.kind) + " shape must have " + std::to_string(want) +
                           " entries, got " + std::to_string(e.shape.size()));
    }
    for (auto d : e.shape) {
        if (d < 1) throw schema_error(where + ": shape entries must be >= 1");
    }
    if (e.blob.empty()) throw schema_error(where + ": empty blob path");
}

model_manifest parse_manifest(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const nlohmann::json::parse_error& ex) {
        throw schema_error(std::string("malformed manifest JSON: ") + ex.what());
    }
    if (!doc.is_object()) throw schema_error("manifest must be a JSON object");

    model_manifest m;
    m.model_name = require<std::string>(doc, "model_name", "manifest");
    if (!doc.contains("layers") || !doc["layers"].is_array()) {
        throw schema_error("manifest: 'layers' must be an array");
    }
    std::set<std::string> seen;
    std::size_t index = 0;
    for (const auto& item : doc["layers"]) {
        std::string name = item.is_object() && item.contains("name") && item["name"].is_string()
                               ? item["name"].get<std::string>()
                               : std::string{};
        const std::string where = layer_label(index, name);
        if (!item.is_object()) throw schema_error(where + ": entry must be an object");

        layer_entry e;
        e.name = require<std::string>(item, "name", where);
        e.kind = parse_kind(require<std::string>(item, "kind", where), where);
        e.shape = require<std::vector<std::int64_t>>(item, "shape", where);
        e.type = parse_dtype(require<std::string>(item, "dtype", where), where);
        e.blob = require<std::string>(item, "blob", where);
        const auto off = require<std::int64_t>(item, "offset", where);
        if (off < 0) throw schema_error(where + ": offset must be >= 0");
        e.offset = static_cast<std::uint64_t>(off);
        validate_entry(e);
        if (!seen.insert(e.name).second) throw schema_error("duplicate layer name '" + e.name + "'");
        m.layers.push_back(std::move(e));
        ++index;
    }
    return m;
}

model_manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open manifest " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_manifest(ss.str());
}

std::vector<double> decode_le(std::span<const std::byte> bytes, dtype t) {
    const std::size_t width = dtype_size(t);
    std::vector<double> out(bytes.size() / width);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint64_t raw = 0;
        for (std::size_t b = 0; b < width; ++b) {
            raw |= static_cast<std::uint64_t>(std::to_integer<unsigned>(bytes[i * width + b])) << (8 * b);
        }
        if (t == dtype::f32) {
            out[i] = static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(raw)));
        } else {
            out[i] = std::bit_cast<double>(raw);
        }
    }
    return out;
}

std::vector<std::byte> encode_le(std::span<const double> values, dtype t) {
    const std::size_t width = dtype_size(t);
    std::vector<std::byte> out(values.size() * width);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::uint64_t raw = t == dtype::f32
                                      ? std::bit_cast<std::uint32_t>(static_cast<float>(values[i]))
                                      : std::bit_cast<std::uint64_t>(values[i]);
        for (std::size_t b = 0; b < width; ++b) {
            out[i * width + b] = static_cast<std::byte>((raw >> (8 * b)) & 0xff);
        }
    }
    return out;
}

weight_tensor load_tensor(const std::filesystem::path& manifest_dir, const layer_entry& entry,
                          const load_options& opts) {
    validate_entry(entry);
    const std::uint64_t count = entry.element_count();
    if (count > opts.max_elements) {
        throw data_error("layer '" + entry.name + "': " + std::to_string(count) + " elements exceeds the budget of " +
                         std::to_string(opts.max_elements));
    }
    const auto path = manifest_dir / entry.blob;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("layer '" + entry.name + "': cannot open blob " + path.string());

    const std::uint64_t nbytes = count * dtype_size(entry.type);
    std::error_code ec;
    const auto file_size = std::filesystem::file_size(path, ec);
    if (ec) throw io_error("layer '" + entry.name + "': cannot stat blob " + path.string());
    if (file_size < entry.offset + nbytes) {
        throw io_error("layer '" + entry.name + "': short read, need " + std::to_string(entry.offset + nbytes) +
                       " bytes but blob has " + std::to_string(file_size));
    }

    std::vector<std::byte> buf(nbytes);
    in.seekg(static_cast<std::streamoff>(entry.offset));
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(nbytes));
    if (static_cast<std::uint64_t>(in.gcount()) != nbytes) {
        throw io_error("layer '" + entry.name + "': short read from " + path.string());
    }

    weight_tensor t;
    t.entry = entry;
    t.data = decode_le(buf, entry.type);
    for (std::size_t i = 0; i < t.data.size(); ++i) {
        if (!std::isfinite(t.data[i])) {
            throw data_error("layer '" + entry.name + "': non-finite element at flat index " + std::to_string(i));
        }
    }
    return t;
}

std::string manifest_to_json(const model_manifest& m) {
    json doc;
    doc["model_name"] = m.model_name;
    doc["layers"] = json::array();
    for (const auto& e : m.layers) {
        json l;
        l["name"] = e.name;
        l["kind"] = to_string(e.kind);
        l["shape"] = e.shape;
        l["dtype"] = to_string(e.type);
        l["blob"] = e.blob;
        l["offset"] = e.offset;
        doc["layers"].push_back(std::move(l));
    }
    return doc.dump(2) + "\n";
}

model_manifest write_checkpoint(const std::filesystem::path& dir, const std::string& model_name,
                                const std::vector<checkpoint_layer>& layers, dtype type,
                                const std::string& blob_name) {
    std::filesystem::create_directories(dir);
    model_manifest m;
    m.model_name = model_name;

    std::ofstream blob(dir / blob_name, std::ios::binary | std::ios::trunc);
    if (!blob) throw io_error("cannot create blob " + (dir / blob_name).string());
    std::uint64_t offset = 0;
    for (const auto& l : layers) {
        layer_entry e{l.name, l.kind, l.shape, type, blob_name, offset};
        validate_entry(e);
        if (e.element_count() != l.data.size()) {
            throw schema_error("layer '" + l.name + "': data size does not match shape");
        }
        const auto bytes = encode_le(l.data, type);
        blob.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        offset += bytes.size();
        m.layers.push_back(std::move(e));
    }
    if (!blob) throw io_error("write failed for " + (dir / blob_name).string());

    std::ofstream man(dir / "manifest.json", std::ios::trunc);
    if (!man) throw io_error("cannot create " + (dir / "manifest.json").string());
    man << manifest_to_json(m);
    return m;
}

} // namespace farms
