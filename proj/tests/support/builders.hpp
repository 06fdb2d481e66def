#pragma once

// Small hand-made networks.

#include <string>
#include <vector>

#include "frustra/model.hpp"
#include "frustra/model_io.hpp"

namespace build {

using frustra::LayerKind;
using frustra::LayerSpec;

inline LayerSpec layer(std::string id, LayerKind kind, std::vector<std::string> inputs = {}) {
  LayerSpec l;
  l.id = std::move(id);
  l.kind = kind;
  l.inputs = std::move(inputs);
  return l;
}

inline LayerSpec dense(std::string id, std::string input, std::int64_t units, bool bias = true) {
  auto l = layer(id, LayerKind::dense, {std::move(input)});
  l.params.units = units;
  l.weight_ref = id + ".w";
  if (bias) l.bias_ref = id + ".b";
  return l;
}

inline LayerSpec conv(std::string id, std::string input, std::int64_t kh, std::int64_t kw, std::int64_t filters,
                      frustra::Padding2d pad = {}, std::int64_t stride = 1) {
  auto l = layer(id, LayerKind::conv, {std::move(input)});
  l.params.kernel = {kh, kw};
  l.params.stride = {stride, stride};
  l.params.padding = pad;
  l.params.filters = filters;
  l.weight_ref = id + ".w";
  return l;
}

inline LayerSpec pool(std::string id, LayerKind kind, std::string input, std::int64_t kh, std::int64_t kw) {
  auto l = layer(id, kind, {std::move(input)});
  l.params.kernel = {kh, kw};
  l.params.stride = {kh, kw};
  return l;
}

inline frustra::Blob blob(std::vector<std::int64_t> shape, std::vector<float> values) {
  return frustra::Blob{std::move(shape), std::move(values)};
}

inline frustra::Model model(frustra::TensorShape input, std::vector<LayerSpec> layers, frustra::WeightStore store) {
  frustra::NetworkManifest m(std::move(input), std::move(layers), store);
  return frustra::Model{std::move(m), std::move(store)};
}

}  // namespace build
