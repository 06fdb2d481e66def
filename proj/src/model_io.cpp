#include "frustra/model_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "frustra/binary_io.hpp"
#include "frustra/error.hpp"

namespace frustra {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

constexpr char kBlobMagic[9] = "FRUSTBLB";

Blob read_blob(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open blob file " + path.string());
  const std::string what = "blob " + path.string();
  binary::expect_magic(is, kBlobMagic, what);
  Blob blob;
  const auto rank = binary::read_le<std::uint32_t>(is, what);
  if (rank == 0 || rank > 8) throw ValidationError(what + ": unsupported rank " + std::to_string(rank));
  for (std::uint32_t i = 0; i < rank; ++i) {
    blob.shape.push_back(binary::read_le<std::uint32_t>(is, what));
  }
  const auto want = blob.declared_size();
  blob.values.reserve(static_cast<std::size_t>(want));
  for (std::int64_t i = 0; i < want; ++i) {
    if (is.peek() == std::char_traits<char>::eof()) {
      throw ValidationError(what + ": blob length mismatch (payload shorter than declared shape)");
    }
    blob.values.push_back(binary::read_le<float>(is, what));
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw ValidationError(what + ": blob length mismatch (trailing bytes after payload)");
  }
  return blob;
}

void write_blob(const fs::path& path, const Blob& blob) {
  if (blob.declared_size() != static_cast<std::int64_t>(blob.values.size())) {
    throw ValidationError("blob length mismatch while writing " + path.string());
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write blob file " + path.string());
  os.write(kBlobMagic, 8);
  binary::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(blob.shape.size()));
  for (auto d : blob.shape) binary::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
  for (float v : blob.values) binary::write_le<float>(os, v);
  if (!os) throw IoError("failed writing blob file " + path.string());
}

namespace {

Extent2d parse_extent(const json& v, const std::string& id, const char* key) {
  if (v.is_number_integer()) return {v.get<std::int64_t>(), v.get<std::int64_t>()};
  if (v.is_array() && v.size() == 2) return {v[0].get<std::int64_t>(), v[1].get<std::int64_t>()};
  throw ValidationError("layer '" + id + "': params." + key + " must be an integer or [h, w]");
}

Padding2d parse_padding(const json& v, const std::string& id) {
  if (v.is_number_integer()) {
    auto p = v.get<std::int64_t>();
    return {p, p, p, p};
  }
  if (v.is_array() && v.size() == 2) {
    auto ph = v[0].get<std::int64_t>();
    auto pw = v[1].get<std::int64_t>();
    return {ph, ph, pw, pw};
  }
  if (v.is_array() && v.size() == 4) {
    return {v[0].get<std::int64_t>(), v[1].get<std::int64_t>(), v[2].get<std::int64_t>(),
            v[3].get<std::int64_t>()};
  }
  throw ValidationError("layer '" + id +
                        "': params.padding must be an integer, [h, w] or [top, bottom, left, right]");
}

LayerParams parse_params(const json& j, LayerKind kind, const std::string& id) {
  LayerParams p;
  if (j.is_null()) return p;
  if (!j.is_object()) throw ValidationError("layer '" + id + "': params must be an object");
  if (is_convolution(kind)) {
    if (!j.contains("kernel")) throw ValidationError("layer '" + id + "': params.kernel missing");
    p.kernel = parse_extent(j.at("kernel"), id, "kernel");
    if (j.contains("stride")) p.stride = parse_extent(j.at("stride"), id, "stride");
    if (j.contains("padding")) p.padding = parse_padding(j.at("padding"), id);
    p.filters = j.value("filters", std::int64_t{0});
    p.groups = j.value("groups", std::int64_t{1});
    p.shuffle = j.value("shuffle", false);
  } else if (is_pool(kind)) {
    if (!j.contains("window")) throw ValidationError("layer '" + id + "': params.window missing");
    p.kernel = parse_extent(j.at("window"), id, "window");
    p.stride = j.contains("stride") ? parse_extent(j.at("stride"), id, "stride") : p.kernel;
    if (j.contains("padding")) p.padding = parse_padding(j.at("padding"), id);
  } else if (kind == LayerKind::dense) {
    p.units = j.value("units", std::int64_t{0});
  } else if (kind == LayerKind::batch_norm) {
    p.bn_epsilon = j.value("epsilon", p.bn_epsilon);
  } else if (kind == LayerKind::lrn) {
    p.lrn_alpha = j.value("alpha", p.lrn_alpha);
    p.lrn_beta = j.value("beta", p.lrn_beta);
    p.lrn_k = j.value("k", p.lrn_k);
    p.lrn_size = j.value("size", p.lrn_size);
  }
  return p;
}

ordered_json params_to_json(const LayerSpec& l) {
  const auto& p = l.params;
  ordered_json j = ordered_json::object();
  if (is_convolution(l.kind)) {
    j["kernel"] = {p.kernel.h, p.kernel.w};
    j["stride"] = {p.stride.h, p.stride.w};
    j["padding"] = {p.padding.top, p.padding.bottom, p.padding.left, p.padding.right};
    j["filters"] = p.filters;
    if (l.kind == LayerKind::grouped_conv) {
      j["groups"] = p.groups;
      j["shuffle"] = p.shuffle;
    }
  } else if (is_pool(l.kind)) {
    j["window"] = {p.kernel.h, p.kernel.w};
    j["stride"] = {p.stride.h, p.stride.w};
    j["padding"] = {p.padding.top, p.padding.bottom, p.padding.left, p.padding.right};
  } else if (l.kind == LayerKind::dense) {
    j["units"] = p.units;
  } else if (l.kind == LayerKind::batch_norm) {
    j["epsilon"] = p.bn_epsilon;
  } else if (l.kind == LayerKind::lrn) {
    j["alpha"] = p.lrn_alpha;
    j["beta"] = p.lrn_beta;
    j["k"] = p.lrn_k;
    j["size"] = p.lrn_size;
  }
  return j;
}

struct ParsedManifest {
  TensorShape input_shape;
  std::vector<LayerSpec> layers;
  std::optional<std::int64_t> declared_output_size;
};

ParsedManifest parse_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("manifest is not valid JSON: ") + e.what());
  }
  try {
    if (!root.is_object()) throw ValidationError("manifest root must be an object");
    if (!root.contains("input_shape")) throw ValidationError("manifest: input_shape missing");
    if (!root.contains("layers") || !root.at("layers").is_array()) {
      throw ValidationError("manifest: layers array missing");
    }
    ParsedManifest out{TensorShape(root.at("input_shape").get<std::vector<std::int64_t>>()), {}, {}};
    if (root.contains("output_size")) out.declared_output_size = root.at("output_size").get<std::int64_t>();
    for (const auto& jl : root.at("layers")) {
      LayerSpec l;
      if (!jl.contains("id") || !jl.at("id").is_string()) {
        throw ValidationError("manifest: every layer needs a string id");
      }
      l.id = jl.at("id").get<std::string>();
      if (!jl.contains("kind")) throw ValidationError("layer '" + l.id + "': kind missing");
      l.kind = parse_layer_kind(jl.at("kind").get<std::string>());
      if (jl.contains("inputs")) l.inputs = jl.at("inputs").get<std::vector<std::string>>();
      l.params = parse_params(jl.contains("params") ? jl.at("params") : json(), l.kind, l.id);
      if (jl.contains("weight_ref") && !jl.at("weight_ref").is_null()) {
        l.weight_ref = jl.at("weight_ref").get<std::string>();
      }
      if (jl.contains("bias_ref") && !jl.at("bias_ref").is_null()) {
        l.bias_ref = jl.at("bias_ref").get<std::string>();
      }
      out.layers.push_back(std::move(l));
    }
    return out;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("manifest schema violation: ") + e.what());
  }
}

NetworkManifest finish(ParsedManifest parsed, const WeightStore& store) {
  auto declared = parsed.declared_output_size;
  NetworkManifest m(std::move(parsed.input_shape), std::move(parsed.layers), store);
  if (declared && *declared != m.output_size()) {
    throw ValidationError("manifest: output_size " + std::to_string(*declared) +
                          " does not match inferred " + std::to_string(m.output_size()));
  }
  return m;
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

NetworkManifest parse_manifest(const std::string& json_text, const WeightStore& store) {
  return finish(parse_json(json_text), store);
}

Model parse_manifest(const std::string& json_text, const fs::path& blob_dir) {
  auto parsed = parse_json(json_text);
  WeightStore store;
  for (const auto& l : parsed.layers) {
    for (const auto* ref : {&l.weight_ref, &l.bias_ref}) {
      if (!*ref || store.contains(**ref)) continue;
      const auto file = blob_dir / (**ref + ".blob");
      if (!fs::exists(file)) {
        throw ValidationError("layer '" + l.id + "': dangling blob reference '" + **ref + "' (" +
                              file.string() + " not found)");
      }
      store.put(**ref, read_blob(file));
    }
  }
  auto manifest = finish(std::move(parsed), store);
  return Model{std::move(manifest), std::move(store)};
}

Model load_manifest(const fs::path& path) {
  return parse_manifest(read_text(path), path.parent_path());
}

std::string manifest_to_json(const NetworkManifest& manifest) {
  ordered_json root;
  root["input_shape"] = manifest.input_shape().dims();
  root["output_size"] = manifest.output_size();
  ordered_json layers = ordered_json::array();
  for (const auto& l : manifest.layers()) {
    ordered_json jl;
    jl["id"] = l.id;
    jl["kind"] = std::string(to_string(l.kind));
    jl["inputs"] = l.inputs;
    jl["params"] = params_to_json(l);
    if (l.weight_ref) jl["weight_ref"] = *l.weight_ref;
    if (l.bias_ref) jl["bias_ref"] = *l.bias_ref;
    layers.push_back(std::move(jl));
  }
  root["layers"] = std::move(layers);
  return root.dump(2) + "\n";
}

void save_model(const fs::path& manifest_path, const NetworkManifest& manifest,
                const WeightStore& store) {
  const auto dir = manifest_path.parent_path();
  if (!dir.empty()) fs::create_directories(dir);
  {
    std::ofstream os(manifest_path, std::ios::trunc);
    if (!os) throw IoError("cannot write manifest " + manifest_path.string());
    os << manifest_to_json(manifest);
  }
  std::set<std::string> written;
  for (const auto& l : manifest.layers()) {
    for (const auto* ref : {&l.weight_ref, &l.bias_ref}) {
      if (*ref && written.insert(**ref).second) write_blob(dir / (**ref + ".blob"), store.get(**ref));
    }
  }
}

}  // namespace frustra
