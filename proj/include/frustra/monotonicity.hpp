#pragma once

// Near-monotonicity of the input-output map along an orthant order pair
// (s_x, s_y): perturb x along S_x, measure the output alignment fraction
// Omega, and summarise Omega samples by lambda, the largest value with
// P(|Omega - 0.5| >= lambda) >= 2 lambda.

#include <cstdint>
#include <span>
#include <vector>

#include "frustra/graph_builder.hpp"
#include "frustra/inference.hpp"

namespace frustra {

enum class OrderSource { ground_state, random_null };

struct PartialOrderPair {
  std::vector<std::int8_t> s_x;
  std::vector<std::int8_t> s_y;
  OrderSource source = OrderSource::ground_state;
};

/// Input and output sub-vectors of a full spin vector.
PartialOrderPair order_from_spins(const NodeLayout& layout, std::span<const std::int8_t> spins);
/// Independent uniform signs; source = random_null.
PartialOrderPair random_order(std::int64_t n_inputs, std::int64_t n_outputs, std::uint64_t seed);

/// x2 = x1 + S_x delta with delta_k uniform on (0, 2 m / sqrt(n0)], then
/// rescaled so ||delta|| = m. Throws ValidationError unless m > 0.
std::vector<double> perturb(std::span<const double> x1, std::span<const std::int8_t> s_x, double magnitude,
                            std::uint64_t seed);

/// Fraction of outputs with s_y,i (y2_i - y1_i) >= 0.
double omega(std::span<const double> y1, std::span<const double> y2, std::span<const std::int8_t> s_y);

struct OmegaRecord {
  std::int64_t image = 0;
  std::int64_t perturbation = 0;
  double magnitude = 0.0;
  double delta_norm = 0.0;
  double omega = 0.0;
  std::int64_t class_before = 0;
  std::int64_t class_after = 0;
};

struct OmegaSampleSet {
  std::vector<OmegaRecord> records;  // sorted by (image, perturbation)

  std::vector<double> omegas() const;
  double mean_omega() const;
  /// Standard error of the mean of Omega (sample standard deviation / sqrt(N)).
  double standard_error() const;
};

struct ProtocolConfig {
  std::int64_t per_image = 20;
  std::vector<double> magnitudes{0.5, 1.0, 2.0, 4.0};
  std::uint64_t seed = 0;
};

/// Perturbation p of image i uses magnitudes[p % M] and an independent delta.
/// With a random_null order a fresh (s_x, s_y) is drawn per perturbation and
/// the vectors in `order` only fix the sizes.
OmegaSampleSet run_protocol(const Network& net, const PartialOrderPair& order,
                            const std::vector<std::vector<double>>& images, const ProtocolConfig& config);

struct LambdaResult {
  double lambda = 0.0;
  /// Empirical CCDF of |Omega - 0.5|: points (d, P(|Omega - 0.5| >= d)) at
  /// each distinct deviation d, descending in d.
  std::vector<std::pair<double, double>> ccdf;
};

/// lambda = max_k min(d_(k), k / (2N)) over deviations sorted in descending
/// order, which is the exact maximiser for the empirical CCDF.
LambdaResult lambda_from_samples(std::span<const double> omegas);
LambdaResult lambda_from_samples(const OmegaSampleSet& samples);

struct ImageConsistency {
  std::int64_t image = 0;
  double fraction = 0.0;  // perturbations with Omega > 0.5
};
std::vector<ImageConsistency> direction_consistency(const OmegaSampleSet& samples);

struct MagnitudeStability {
  double magnitude = 0.0;
  std::int64_t count = 0;
  double fraction = 0.0;  // predicted class unchanged
};
/// Sorted by magnitude.
std::vector<MagnitudeStability> class_stability(const OmegaSampleSet& samples);

}  // namespace frustra
