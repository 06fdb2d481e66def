#pragma once

// Independent reference implementations used as test oracles. None of these
// call into the library code they check.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "frustra/graph.hpp"
#include "frustra/model.hpp"

namespace oracle {

using Dense = std::vector<std::vector<double>>;

/// A_u = A + A^T as a dense matrix, read straight from CSR.
inline Dense dense_symmetric(const frustra::SignedSparseGraph& g) {
  const auto n = static_cast<std::size_t>(g.node_count());
  Dense a(n, std::vector<double>(n, 0.0));
  const auto rp = g.row_ptr();
  const auto cols = g.cols();
  const auto w = g.weights();
  for (std::size_t r = 0; r < n; ++r) {
    for (auto e = rp[r]; e < rp[r + 1]; ++e) {
      a[r][cols[e]] += w[e];
      a[cols[e]][r] += w[e];
    }
  }
  return a;
}

/// 1/2 (1 - alpha 1^T S A_u S 1), literally.
inline double energy(const Dense& au, const std::vector<int>& s) {
  double total = 0.0, quad = 0.0;
  for (std::size_t i = 0; i < au.size(); ++i) {
    for (std::size_t j = 0; j < au.size(); ++j) {
      total += std::abs(au[i][j]);
      quad += s[i] * au[i][j] * s[j];
    }
  }
  return 0.5 * (1.0 - quad / total);
}

/// Minimum energy over all 2^n spin vectors.
inline double exhaustive_min(const Dense& au) {
  const auto n = au.size();
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> s(n);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    for (std::size_t i = 0; i < n; ++i) s[i] = (mask >> i) & 1 ? -1 : 1;
    best = std::min(best, energy(au, s));
  }
  return best;
}

/// Row sums of S A_u S from the dense matrix.
inline std::vector<double> row_sums(const Dense& au, const std::vector<int>& s) {
  std::vector<double> r(au.size(), 0.0);
  for (std::size_t i = 0; i < au.size(); ++i) {
    for (std::size_t j = 0; j < au.size(); ++j) r[i] += s[i] * au[i][j] * s[j];
  }
  return r;
}

/// Number of in-bounds window taps along one axis, summed over outputs.
inline std::int64_t taps_1d(std::int64_t in, std::int64_t pad_lo, std::int64_t pad_hi, std::int64_t k, std::int64_t stride) {
  std::int64_t total = 0;
  for (std::int64_t o = 0; o * stride + k <= in + pad_lo + pad_hi; ++o) {
    for (std::int64_t t = 0; t < k; ++t) {
      const auto pos = o * stride - pad_lo + t;
      total += pos >= 0 && pos < in;
    }
  }
  return total;
}

/// Edge count of a convolution/pooling layer by receptive-field enumeration:
/// in-bounds taps per axis, times input channels per group, times output channels.
inline std::int64_t window_edges(const frustra::LayerSpec& l, const frustra::TensorShape& in, std::int64_t cin_per_out,
                                 std::int64_t out_channels) {
  const auto& p = l.params;
  return taps_1d(in.height(), p.padding.top, p.padding.bottom, p.kernel.h, p.stride.h) *
         taps_1d(in.width(), p.padding.left, p.padding.right, p.kernel.w, p.stride.w) * cin_per_out * out_channels;
}

}  // namespace oracle
