#pragma once

// Weighted signed sparse adjacency matrix of a feed-forward network and its
// symmetrized view. Entry (i, j) with weight w is the edge j -> i; rows are
// targets, columns are sources, stored in CSR.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "frustra/model.hpp"

namespace frustra {

/// Which layer an edge came from and which parameter of that layer's kernel
/// or matrix it carries. param is -1 for fixed weights (pooling, add).
struct EdgeProvenance {
  std::int32_t layer = -1;  // index into SignedSparseGraph::layers()
  std::int64_t param = -1;
  friend bool operator==(const EdgeProvenance&, const EdgeProvenance&) = default;
};

struct Triplet {
  std::int64_t row = 0;
  std::int64_t col = 0;
  double weight = 0.0;
  EdgeProvenance provenance;
};

/// Contiguous node range owned by one layer.
struct LayerBlock {
  std::string id;
  LayerKind kind = LayerKind::input;
  std::int64_t begin = 0;
  std::int64_t count = 0;
  std::int64_t end() const { return begin + count; }
  friend bool operator==(const LayerBlock&, const LayerBlock&) = default;
};

class SignedSparseGraph {
 public:
  SignedSparseGraph() = default;

  /// Builds CSR from unordered triplets. Rejects self-loops, zero or
  /// non-finite weights, out-of-range indices and duplicate entries.
  static SignedSparseGraph from_triplets(std::int64_t node_count, std::vector<Triplet> triplets,
                                         std::vector<LayerBlock> layers = {});

  /// Takes CSR arrays as-is (columns sorted within rows) and validates them.
  SignedSparseGraph(std::int64_t node_count, std::vector<std::int64_t> row_ptr,
                    std::vector<std::int64_t> cols, std::vector<double> weights,
                    std::vector<EdgeProvenance> provenance, std::vector<LayerBlock> layers);

  std::int64_t node_count() const { return n_; }
  std::int64_t edge_count() const { return static_cast<std::int64_t>(cols_.size()); }

  std::span<const std::int64_t> row_ptr() const { return row_ptr_; }
  std::span<const std::int64_t> cols() const { return cols_; }
  std::span<const double> weights() const { return weights_; }
  std::span<const EdgeProvenance> provenance() const { return provenance_; }
  std::span<const LayerBlock> layers() const { return layers_; }

  std::span<const std::int64_t> row_cols(std::int64_t row) const {
    return std::span(cols_).subspan(row_ptr_[row], row_ptr_[row + 1] - row_ptr_[row]);
  }
  std::span<const double> row_weights(std::int64_t row) const {
    return std::span(weights_).subspan(row_ptr_[row], row_ptr_[row + 1] - row_ptr_[row]);
  }

  std::optional<std::size_t> find_layer(std::string_view id) const;
  /// Row index of every edge, parallel to cols().
  std::vector<std::int64_t> edge_rows() const;

  /// Same structure and provenance, new weight per edge.
  SignedSparseGraph with_weights(std::vector<double> weights) const;

  /// Every edge goes from a lower to a higher node index.
  bool is_lower_triangular() const;
  double total_abs_weight() const;

  friend bool operator==(const SignedSparseGraph&, const SignedSparseGraph&) = default;

 private:
  void validate() const;

  std::int64_t n_ = 0;
  std::vector<std::int64_t> row_ptr_{0};
  std::vector<std::int64_t> cols_;
  std::vector<double> weights_;
  std::vector<EdgeProvenance> provenance_;
  std::vector<LayerBlock> layers_;
};

/// A_u = A + A^T in CSR with per-row absolute sums.
class SymmetrizedView {
 public:
  explicit SymmetrizedView(const SignedSparseGraph& graph);

  std::int64_t node_count() const { return n_; }
  std::span<const std::int64_t> row_ptr() const { return row_ptr_; }
  std::span<const std::int64_t> cols() const { return cols_; }
  std::span<const double> weights() const { return weights_; }
  std::span<const std::int64_t> neighbors(std::int64_t i) const {
    return std::span(cols_).subspan(row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]);
  }
  std::span<const double> neighbor_weights(std::int64_t i) const {
    return std::span(weights_).subspan(row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]);
  }
  std::int64_t degree(std::int64_t i) const { return row_ptr_[i + 1] - row_ptr_[i]; }

  /// sum_j |A_u|_ij
  std::span<const double> abs_row_sums() const { return abs_row_sums_; }
  /// sum_ij |A_u|_ij; alpha = 1 / total_abs().
  double total_abs() const { return total_abs_; }
  bool empty() const { return cols_.empty(); }

 private:
  std::int64_t n_ = 0;
  std::vector<std::int64_t> row_ptr_;
  std::vector<std::int64_t> cols_;
  std::vector<double> weights_;
  std::vector<double> abs_row_sums_;
  double total_abs_ = 0.0;
};

inline SymmetrizedView symmetrize(const SignedSparseGraph& graph) { return SymmetrizedView(graph); }

}  // namespace frustra
