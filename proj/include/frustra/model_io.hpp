#pragma once

// Manifest JSON and weight blob files.
//
// Manifest: {"input_shape":[...], "layers":[{"id","kind","inputs":[...],
//            "params":{...}, "weight_ref", "bias_ref"}]}
// Blob:     "FRUSTBLB", u32 rank, u32 dims[rank], float32 payload (row-major),
//           little-endian. Blob `id` lives next to the manifest as `<id>.blob`.

#include <filesystem>
#include <string>

#include "frustra/model.hpp"

namespace frustra {

Blob read_blob(const std::filesystem::path& path);
void write_blob(const std::filesystem::path& path, const Blob& blob);

struct Model {
  NetworkManifest manifest;
  WeightStore store;
};

/// Parses a manifest and resolves weight_ref/bias_ref blobs from `blob_dir`.
Model load_manifest(const std::filesystem::path& path);
Model parse_manifest(const std::string& json_text, const std::filesystem::path& blob_dir);
/// Same, with the blobs already in memory.
NetworkManifest parse_manifest(const std::string& json_text, const WeightStore& store);

std::string manifest_to_json(const NetworkManifest& manifest);
/// Writes `manifest_path` plus every referenced blob next to it.
void save_model(const std::filesystem::path& manifest_path, const NetworkManifest& manifest,
                const WeightStore& store);

}  // namespace frustra
