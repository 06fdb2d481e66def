#pragma once

// Randomized baselines.
//   N1  permute each conv/dense layer's parameters over its parameter slots
//   N2  permute all conv/dense edge weights over their edge positions
//   N3  redraw conv/dense weights (Xavier uniform or He normal), rebuild A
// Pooling and add edges are never touched.

#include <cstdint>
#include <optional>
#include <string_view>

#include "frustra/graph.hpp"
#include "frustra/model.hpp"

namespace frustra {

enum class NullKind { n1, n2, n3 };
enum class InitScheme { xavier_uniform, he_normal };

NullKind parse_null_kind(std::string_view name);
std::string_view to_string(NullKind kind);
InitScheme parse_init_scheme(std::string_view name);  // accepts xavier, xavier_uniform, he, he_normal
std::string_view to_string(InitScheme scheme);

struct NullModelSpec {
  NullKind kind = NullKind::n1;
  std::uint64_t seed = 0;
  std::optional<InitScheme> n3_init;  // present iff kind == n3

  void validate() const;
};

/// Edge belongs to a conv, grouped_conv or dense block.
bool is_shuffled_edge(const SignedSparseGraph& graph, std::size_t edge);

/// N1. Every edge takes the value of the permuted slot of its parameter, so
/// Toeplitz copies stay identical. Only slots that carry edges take part
/// (zero-valued parameters produce no edges). Throws ValidationError when a
/// conv/dense edge lacks provenance.
SignedSparseGraph n1_shuffle(const SignedSparseGraph& graph, std::uint64_t seed);

/// N2. Uniform permutation of the conv/dense edge weights over those positions.
SignedSparseGraph n2_shuffle(const SignedSparseGraph& graph, std::uint64_t seed);

struct FanCounts {
  double fan_in = 0.0;
  double fan_out = 0.0;
};

/// conv: kh*kw*cin/g and kh*kw*filters; dense: n_in and units.
FanCounts fan_counts(const LayerSpec& layer, const TensorShape& in_shape);

/// sqrt(6 / (fan_in + fan_out))
double xavier_bound(const FanCounts& fans);
/// sqrt(2 / fan_in)
double he_stddev(const FanCounts& fans);

/// N3. Conv/dense weights redrawn layer by layer (seed derived from
/// spec.seed and the layer id) and their biases set to zero; batch-norm
/// constants are kept.
WeightStore n3_reinit(const NetworkManifest& manifest, const WeightStore& store, const NullModelSpec& spec);

}  // namespace frustra
