#include "frustra/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "frustra/error.hpp"

namespace frustra {

SignedSparseGraph SignedSparseGraph::from_triplets(std::int64_t node_count,
                                                   std::vector<Triplet> triplets,
                                                   std::vector<LayerBlock> layers) {
  if (node_count < 0) throw ValidationError("negative node count");
  std::vector<std::int64_t> row_ptr(static_cast<std::size_t>(node_count) + 1, 0);
  for (const auto& t : triplets) {
    if (t.row < 0 || t.row >= node_count || t.col < 0 || t.col >= node_count) {
      throw ValidationError("edge (" + std::to_string(t.row) + ", " + std::to_string(t.col) +
                            ") out of range");
    }
    ++row_ptr[t.row + 1];
  }
  std::partial_sum(row_ptr.begin(), row_ptr.end(), row_ptr.begin());

  // counting sort by row, then sort each row by column
  std::vector<std::size_t> order(triplets.size());
  {
    auto next = row_ptr;
    for (std::size_t k = 0; k < triplets.size(); ++k) order[next[triplets[k].row]++] = k;
  }
  for (std::int64_t r = 0; r < node_count; ++r) {
    std::sort(order.begin() + row_ptr[r], order.begin() + row_ptr[r + 1],
              [&](std::size_t a, std::size_t b) { return triplets[a].col < triplets[b].col; });
  }
  std::vector<std::int64_t> cols(triplets.size());
  std::vector<double> weights(triplets.size());
  std::vector<EdgeProvenance> prov(triplets.size());
  for (std::size_t e = 0; e < order.size(); ++e) {
    const auto& t = triplets[order[e]];
    cols[e] = t.col;
    weights[e] = t.weight;
    prov[e] = t.provenance;
  }
  return SignedSparseGraph(node_count, std::move(row_ptr), std::move(cols), std::move(weights),
                           std::move(prov), std::move(layers));
}

SignedSparseGraph::SignedSparseGraph(std::int64_t node_count, std::vector<std::int64_t> row_ptr,
                                     std::vector<std::int64_t> cols, std::vector<double> weights,
                                     std::vector<EdgeProvenance> provenance,
                                     std::vector<LayerBlock> layers)
    : n_(node_count),
      row_ptr_(std::move(row_ptr)),
      cols_(std::move(cols)),
      weights_(std::move(weights)),
      provenance_(std::move(provenance)),
      layers_(std::move(layers)) {
  if (provenance_.empty() && !cols_.empty()) provenance_.resize(cols_.size());
  validate();
}

void SignedSparseGraph::validate() const {
  if (n_ < 0) throw ValidationError("negative node count");
  if (row_ptr_.size() != static_cast<std::size_t>(n_) + 1 || row_ptr_.front() != 0 ||
      row_ptr_.back() != static_cast<std::int64_t>(cols_.size())) {
    throw ValidationError("malformed CSR row pointer");
  }
  if (weights_.size() != cols_.size() || provenance_.size() != cols_.size()) {
    throw ValidationError("CSR arrays have inconsistent lengths");
  }
  for (std::int64_t r = 0; r < n_; ++r) {
    if (row_ptr_[r] > row_ptr_[r + 1]) throw ValidationError("CSR row pointer not monotone");
    for (auto e = row_ptr_[r]; e < row_ptr_[r + 1]; ++e) {
      const auto c = cols_[e];
      if (c < 0 || c >= n_) throw ValidationError("column index out of range");
      if (c == r) throw ValidationError("self-loop at node " + std::to_string(r));
      if (e > row_ptr_[r] && cols_[e - 1] >= c) {
        throw ValidationError("duplicate or unsorted entry in row " + std::to_string(r));
      }
      if (!std::isfinite(weights_[e]) || weights_[e] == 0.0) {
        throw ValidationError("edge weight must be finite and nonzero (row " + std::to_string(r) +
                              ", col " + std::to_string(c) + ")");
      }
      const auto layer = provenance_[e].layer;
      if (layer < -1 || layer >= static_cast<std::int32_t>(layers_.size())) {
        throw ValidationError("edge provenance refers to an unknown layer");
      }
    }
  }
  for (const auto& b : layers_) {
    if (b.begin < 0 || b.count < 0 || b.end() > n_) {
      throw ValidationError("layer block '" + b.id + "' out of range");
    }
  }
}

std::optional<std::size_t> SignedSparseGraph::find_layer(std::string_view id) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].id == id) return i;
  }
  return std::nullopt;
}

std::vector<std::int64_t> SignedSparseGraph::edge_rows() const {
  std::vector<std::int64_t> rows(cols_.size());
  for (std::int64_t r = 0; r < n_; ++r) {
    std::fill(rows.begin() + row_ptr_[r], rows.begin() + row_ptr_[r + 1], r);
  }
  return rows;
}

SignedSparseGraph SignedSparseGraph::with_weights(std::vector<double> weights) const {
  return SignedSparseGraph(n_, row_ptr_, cols_, std::move(weights), provenance_, layers_);
}

bool SignedSparseGraph::is_lower_triangular() const {
  for (std::int64_t r = 0; r < n_; ++r) {
    for (auto e = row_ptr_[r]; e < row_ptr_[r + 1]; ++e) {
      if (cols_[e] >= r) return false;
    }
  }
  return true;
}

double SignedSparseGraph::total_abs_weight() const {
  double s = 0.0;
  for (double w : weights_) s += std::abs(w);
  return s;
}

SymmetrizedView::SymmetrizedView(const SignedSparseGraph& graph) : n_(graph.node_count()) {
  const auto rp = graph.row_ptr();
  const auto cols = graph.cols();
  const auto w = graph.weights();

  // degree count of A + A^T before merging coincident (i,j)/(j,i) entries
  std::vector<std::int64_t> ptr(static_cast<std::size_t>(n_) + 1, 0);
  for (std::int64_t r = 0; r < n_; ++r) {
    for (auto e = rp[r]; e < rp[r + 1]; ++e) {
      ++ptr[r + 1];
      ++ptr[cols[e] + 1];
    }
  }
  std::partial_sum(ptr.begin(), ptr.end(), ptr.begin());
  std::vector<std::int64_t> c(ptr.back());
  std::vector<double> v(ptr.back());
  auto next = ptr;
  for (std::int64_t r = 0; r < n_; ++r) {
    for (auto e = rp[r]; e < rp[r + 1]; ++e) {
      const auto j = cols[e];
      c[next[r]] = j;
      v[next[r]++] = w[e];
      c[next[j]] = r;
      v[next[j]++] = w[e];
    }
  }

  row_ptr_.assign(static_cast<std::size_t>(n_) + 1, 0);
  cols_.reserve(c.size());
  weights_.reserve(c.size());
  abs_row_sums_.assign(static_cast<std::size_t>(n_), 0.0);
  std::vector<std::size_t> idx;
  for (std::int64_t r = 0; r < n_; ++r) {
    idx.resize(static_cast<std::size_t>(ptr[r + 1] - ptr[r]));
    std::iota(idx.begin(), idx.end(), static_cast<std::size_t>(ptr[r]));
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return c[a] < c[b]; });
    for (std::size_t k = 0; k < idx.size();) {
      const auto col = c[idx[k]];
      double sum = 0.0;
      for (; k < idx.size() && c[idx[k]] == col; ++k) sum += v[idx[k]];
      if (sum != 0.0) {
        cols_.push_back(col);
        weights_.push_back(sum);
        abs_row_sums_[r] += std::abs(sum);
      }
    }
    row_ptr_[r + 1] = static_cast<std::int64_t>(cols_.size());
  }
  total_abs_ = std::accumulate(abs_row_sums_.begin(), abs_row_sums_.end(), 0.0);
}

}  // namespace frustra
