#pragma once

// Double-precision forward evaluation, per-input active subnetworks and a
// finite-difference check of sgn(F(z)) = sgn(diag(I(z)) A).

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "frustra/graph.hpp"
#include "frustra/graph_builder.hpp"
#include "frustra/model.hpp"

namespace frustra {

struct ActivationTrace {
  /// Output tensor of every manifest layer (owning layers: q before activations).
  std::vector<std::vector<double>> layer_outputs;
  /// Per graph node: q (op output incl. bias) and z (after the activation
  /// chain, stopping before a final softmax so output states are logits).
  std::vector<double> preactivation;
  std::vector<double> state;
  /// 1 unless a ReLU in the node's chain received an input <= 0.
  std::vector<std::uint8_t> active;
  std::vector<double> logits;
  std::int64_t predicted_class = 0;
  /// Several logits share the maximum; predicted_class is the lowest of them.
  bool predicted_tie = false;
};

/// Evaluator bound to a manifest and store, both of which must outlive it.
class Network {
 public:
  Network(const NetworkManifest& manifest, const WeightStore& store);

  const NetworkManifest& manifest() const { return *manifest_; }
  const NodeLayout& layout() const { return layout_; }
  std::int64_t input_size() const { return manifest_->input_shape().size(); }
  std::int64_t output_size() const { return layout_.outputs().count; }

  /// Throws ValidationError on a size mismatch, NumericalError (naming the
  /// layer) on a non-finite intermediate.
  ActivationTrace forward(std::span<const double> x) const;
  std::vector<double> logits(std::span<const double> x) const;

  /// Node states of owning layer `layer` given its input tensors (one per
  /// manifest input, in order).
  std::vector<double> eval_block(std::size_t layer, const std::vector<std::vector<double>>& inputs) const;

 private:
  std::vector<double> apply(std::size_t layer, const std::vector<const std::vector<double>*>& inputs) const;

  const NetworkManifest* manifest_;
  const WeightStore* store_;
  NodeLayout layout_;
  std::vector<std::vector<double>> weights_;  // per layer, double copy
  std::vector<std::vector<double>> biases_;
  std::vector<std::vector<std::size_t>> chain_;       // owning layer -> activations applied to it
  std::vector<std::size_t> state_layer_;              // owning layer -> layer whose output is z
};

ActivationTrace forward(const NetworkManifest& manifest, const WeightStore& store, std::span<const double> x);

struct ActiveSubgraph {
  /// Compact renumbering in original node order; layer table ranges remapped,
  /// provenance and weights kept.
  SignedSparseGraph graph;
  std::vector<std::int64_t> original_nodes;  // compact -> original id
  std::int64_t output_node = -1;             // compact id of the predicted class
  std::int64_t output_original = -1;
};

/// Keeps ReLU-active nodes, only argmax edges (all ties) into max-pool
/// nodes and only the predicted output node, then every node that is not
/// both reachable from an input node and connected to the retained output
/// by a directed path.
ActiveSubgraph extract_active(const SignedSparseGraph& graph, const NodeLayout& layout,
                              const ActivationTrace& trace);

struct JacobianOptions {
  double step = 1e-4;
  double tolerance = 1e-6;     // |derivative| <= tolerance counts as zero
  double kink_margin = 1e-3;   // see is_kink_free
  std::int64_t max_attempts = 1000;
  std::int64_t max_sources_per_layer = 0;  // 0 = every source node
  std::uint64_t seed = 0;
  std::size_t max_reported = 50;
};

struct SignViolation {
  std::string layer;
  std::int64_t row = 0;
  std::int64_t col = 0;
  int expected = 0;
  double derivative = 0.0;
};

struct JacobianReport {
  std::vector<double> input;  // the kink-free point actually used
  std::int64_t attempts = 0;
  std::int64_t entries = 0;           // (target, source) pairs compared
  std::int64_t nonzero_expected = 0;  // of which sgn(diag(I) A) != 0
  std::int64_t agreements = 0;
  std::int64_t violation_count = 0;
  std::vector<SignViolation> violations;  // first max_reported

  double agreement_fraction() const {
    return entries == 0 ? 1.0 : static_cast<double>(agreements) / static_cast<double>(entries);
  }
  bool passed() const { return violation_count == 0; }
};

/// Whether every ReLU input is at least `margin` away from 0 and every
/// max-pool input either equals its window maximum or is at least `margin`
/// below it.
bool is_kink_free(const Network& net, const SignedSparseGraph& graph, const ActivationTrace& trace, double margin);

/// Central differences of each layer-to-layer map z_l = f(z_sources),
/// perturbing one source node state at a time, against
/// sgn(diag(I(z)) A) (max-pool rows: argmax edges only). When x is empty or
/// not kink-free, inputs are redrawn uniformly on [0, 1) up to max_attempts
/// times; NumericalError if none qualifies.
JacobianReport jacobian_sign_check(const Network& net, const SignedSparseGraph& graph, std::vector<double> x,
                                   const JacobianOptions& options);

}  // namespace frustra
