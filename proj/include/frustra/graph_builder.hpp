#pragma once

// Expansion of a NetworkManifest into the signed adjacency matrix A:
// convolutions unrolled into Toeplitz blocks, pooling windows into fixed
// 0.01/p weights, add layers into +1 identity edges, concat inputs placed
// directly in the consumer's block-row. Activations contribute no edges.

#include <cstdint>
#include <vector>

#include "frustra/graph.hpp"
#include "frustra/model.hpp"

namespace frustra {

/// Node numbering: node-owning layers in topological order, each layer's
/// elements in raster order (row-major, channels-last).
struct NodeLayout {
  std::int64_t node_count = 0;
  std::vector<LayerBlock> blocks;
  /// Manifest layer -> index into blocks, or -1 for layers owning no nodes.
  std::vector<std::int32_t> block_of_layer;
  /// Manifest layer -> global node of each output element. Activations share
  /// their producer's nodes; concat interleaves its inputs' nodes.
  std::vector<std::vector<std::int64_t>> element_nodes;
  std::int32_t input_block = -1;
  std::int32_t output_block = -1;

  const LayerBlock& inputs() const { return blocks.at(input_block); }
  const LayerBlock& outputs() const { return blocks.at(output_block); }
};

NodeLayout compute_layout(const NetworkManifest& manifest);

/// Edges of one layer in local coordinates: rows index the layer's output
/// elements, cols the input tensor's elements. params index the weight blob
/// (-1 for fixed weights).
struct EdgeBlock {
  std::vector<std::int64_t> rows;
  std::vector<std::int64_t> cols;
  std::vector<double> weights;
  std::vector<std::int64_t> params;
  std::size_t size() const { return rows.size(); }
};

/// Weight of every pooling edge for a kh x kw window: 0.01 / p, p = sqrt(kh*kw).
double pool_edge_weight(const Extent2d& window);

EdgeBlock expand_conv(const LayerSpec& layer, const Blob& weights, const TensorShape& in_shape);
EdgeBlock expand_grouped_conv(const LayerSpec& layer, const Blob& weights,
                              const TensorShape& in_shape);
EdgeBlock expand_pool(const LayerSpec& layer, const TensorShape& in_shape);
EdgeBlock expand_dense(const LayerSpec& layer, const Blob& weights, const TensorShape& in_shape);

/// Full adjacency matrix A (biases excluded). Layer table = layout blocks.
SignedSparseGraph assemble(const NetworkManifest& manifest, const WeightStore& store);

}  // namespace frustra
