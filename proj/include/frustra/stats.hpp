#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace frustra {

double mean(std::span<const double> v);
/// Unbiased sample variance; needs at least 2 values.
double sample_variance(std::span<const double> v);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
};

/// Welch's unequal-variance t-test of mean(a) - mean(b) with
/// Welch-Satterthwaite degrees of freedom. Identical samples give t = 0,
/// p = 1. Throws ValidationError for fewer than 2 values per sample and
/// NumericalError when both sample variances are zero.
WelchResult welch_t(std::span<const double> a, std::span<const double> b);

struct Histogram {
  std::vector<double> edges;  // bins + 1
  std::vector<std::int64_t> counts;
};

/// Uniform bins over [min, max] of the data, last bin closed. Constant data
/// is centred in [v - 0.5, v + 0.5].
Histogram histogram(std::span<const double> values, std::size_t bins = 50);

}  // namespace frustra
