#include "frustra/null_models.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "frustra/error.hpp"
#include "frustra/random.hpp"

namespace frustra {

NullKind parse_null_kind(std::string_view name) {
  if (name == "n1" || name == "N1") return NullKind::n1;
  if (name == "n2" || name == "N2") return NullKind::n2;
  if (name == "n3" || name == "N3") return NullKind::n3;
  throw ValidationError("unknown null model '" + std::string(name) + "'");
}

std::string_view to_string(NullKind kind) {
  switch (kind) {
    case NullKind::n1: return "n1";
    case NullKind::n2: return "n2";
    case NullKind::n3: return "n3";
  }
  return "?";
}

InitScheme parse_init_scheme(std::string_view name) {
  if (name == "xavier" || name == "xavier_uniform") return InitScheme::xavier_uniform;
  if (name == "he" || name == "he_normal") return InitScheme::he_normal;
  throw ValidationError("unknown init scheme '" + std::string(name) + "'");
}

std::string_view to_string(InitScheme scheme) {
  return scheme == InitScheme::xavier_uniform ? "xavier_uniform" : "he_normal";
}

void NullModelSpec::validate() const {
  if (n3_init.has_value() != (kind == NullKind::n3)) {
    throw ValidationError("n3_init must be given for n3 and only for n3");
  }
}

bool is_shuffled_edge(const SignedSparseGraph& graph, std::size_t edge) {
  const auto layer = graph.provenance()[edge].layer;
  if (layer < 0 || static_cast<std::size_t>(layer) >= graph.layers().size()) return false;
  const auto kind = graph.layers()[layer].kind;
  return kind == LayerKind::conv || kind == LayerKind::grouped_conv || kind == LayerKind::dense;
}

SignedSparseGraph n1_shuffle(const SignedSparseGraph& graph, std::uint64_t seed) {
  if (graph.layers().empty() && graph.edge_count() > 0) {
    throw ValidationError("n1 needs the graph's layer table and edge provenance");
  }
  const auto prov = graph.provenance();
  // per layer: parameter slot -> value
  std::map<std::int32_t, std::map<std::int64_t, double>> slots;
  for (std::size_t e = 0; e < prov.size(); ++e) {
    if (!is_shuffled_edge(graph, e)) continue;
    if (prov[e].param < 0) {
      throw ValidationError("edge " + std::to_string(e) + " of layer '" + graph.layers()[prov[e].layer].id +
                            "' has no parameter provenance");
    }
    slots[prov[e].layer].emplace(prov[e].param, graph.weights()[e]);
  }
  std::map<std::int32_t, std::map<std::int64_t, double>> remap;
  for (auto& [layer, values] : slots) {
    std::vector<double> v;
    v.reserve(values.size());
    for (const auto& [slot, w] : values) v.push_back(w);
    auto rng = make_rng(derive_seed(seed, graph.layers()[layer].id));
    shuffle(v.begin(), v.end(), rng);
    auto& out = remap[layer];
    std::size_t k = 0;
    for (const auto& [slot, w] : values) out.emplace(slot, v[k++]);
  }
  std::vector<double> weights(graph.weights().begin(), graph.weights().end());
  for (std::size_t e = 0; e < prov.size(); ++e) {
    if (is_shuffled_edge(graph, e)) weights[e] = remap[prov[e].layer].at(prov[e].param);
  }
  return graph.with_weights(std::move(weights));
}

SignedSparseGraph n2_shuffle(const SignedSparseGraph& graph, std::uint64_t seed) {
  std::vector<std::size_t> positions;
  for (std::size_t e = 0; e < static_cast<std::size_t>(graph.edge_count()); ++e) {
    if (is_shuffled_edge(graph, e)) positions.push_back(e);
  }
  std::vector<double> pool;
  pool.reserve(positions.size());
  for (auto e : positions) pool.push_back(graph.weights()[e]);
  auto rng = make_rng(seed);
  shuffle(pool.begin(), pool.end(), rng);
  std::vector<double> weights(graph.weights().begin(), graph.weights().end());
  for (std::size_t k = 0; k < positions.size(); ++k) weights[positions[k]] = pool[k];
  return graph.with_weights(std::move(weights));
}

FanCounts fan_counts(const LayerSpec& layer, const TensorShape& in) {
  const auto& p = layer.params;
  if (is_convolution(layer.kind)) {
    const double k = static_cast<double>(p.kernel.h * p.kernel.w);
    return {k * static_cast<double>(in.channels() / p.groups), k * static_cast<double>(p.filters)};
  }
  if (layer.kind == LayerKind::dense) {
    return {static_cast<double>(in.size()), static_cast<double>(p.units)};
  }
  throw ValidationError("layer '" + layer.id + "' has no fan counts");
}

double xavier_bound(const FanCounts& fans) { return std::sqrt(6.0 / (fans.fan_in + fans.fan_out)); }

double he_stddev(const FanCounts& fans) { return std::sqrt(2.0 / fans.fan_in); }

WeightStore n3_reinit(const NetworkManifest& manifest, const WeightStore& store, const NullModelSpec& spec) {
  spec.validate();
  if (spec.kind != NullKind::n3) throw ValidationError("n3_reinit called with a non-n3 spec");
  WeightStore out = store;
  for (std::size_t i = 0; i < manifest.layer_count(); ++i) {
    const auto& l = manifest.layer(i);
    if (!is_convolution(l.kind) && l.kind != LayerKind::dense) continue;
    const auto fans = fan_counts(l, manifest.shape(manifest.inputs_of(i)[0]));
    auto rng = make_rng(derive_seed(spec.seed, l.id));
    auto& w = out.get_mutable(*l.weight_ref);
    for (auto& v : w.values) {
      double x = 0.0;
      do {
        x = *spec.n3_init == InitScheme::xavier_uniform
                ? uniform(rng, -xavier_bound(fans), xavier_bound(fans))
                : he_stddev(fans) * standard_normal(rng);
        // a draw that rounds to 0 in float32 would remove the edge from A
      } while (static_cast<float>(x) == 0.0f);
      v = static_cast<float>(x);
    }
    if (l.bias_ref) {
      auto& b = out.get_mutable(*l.bias_ref);
      std::fill(b.values.begin(), b.values.end(), 0.0f);
    }
  }
  return out;
}

}  // namespace frustra
