#pragma once

// Deterministic desk-scale networks standing in for pretrained CNNs.

#include <cstdint>
#include <string_view>
#include <vector>

#include "frustra/model.hpp"
#include "frustra/model_io.hpp"

namespace frustra {

enum class SyntheticTemplate { tiny_mlp, tiny_cnn, residual_cnn, grouped_cnn };

SyntheticTemplate parse_template(std::string_view name);
std::string_view to_string(SyntheticTemplate t);

/// Pure function of (seed, template). Trainable weights are drawn uniformly
/// on [-a, a] with a = 1/sqrt(fan_in); biases on [-0.1, 0.1]; batch-norm
/// gamma and variance on [0.5, 1.5].
///
///   tiny_mlp     4 -> dense 6 + relu -> dense 5 + relu -> dense 3 + softmax
///   tiny_cnn     12x12x3 -> conv3x3(6, pad 1) + bn + relu -> max_pool 2
///                -> conv3x3(8) + relu -> avg_pool 2 -> dense 1000 + softmax
///   residual_cnn 8x8x3 -> conv(4) + relu -> conv(4) -> add(skip) + relu
///                -> max_pool 2 -> dense 10 + softmax
///   grouped_cnn  8x8x4 -> conv(8) + relu -> grouped_conv(8, g=2, shuffle)
///                + relu -> concat -> avg_pool 2 -> dense 10 + softmax
Model generate_synthetic(std::uint64_t seed, SyntheticTemplate which);

/// Input tensor with entries uniform on [lo, hi).
std::vector<double> random_input(const TensorShape& shape, std::uint64_t seed, double lo = 0.0,
                                 double hi = 1.0);

struct GaugedModel {
  WeightStore store;
  /// +-1 per graph node; S A S >= 0 for the rebuilt graph.
  std::vector<int> node_signs;
};

/// Structurally balanced variant of `model`: every trainable weight becomes
/// |w| times the product of a random gauge sign at its two endpoints, with
/// one sign per channel (so Toeplitz repetitions stay identical) and signs
/// tied across pooling and add edges (whose weights are fixed positive).
/// Batch-norm gammas are made positive. Biases are left unchanged.
GaugedModel make_gauged_positive(const Model& model, std::uint64_t seed);

}  // namespace frustra
