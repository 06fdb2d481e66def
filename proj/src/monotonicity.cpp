#include "frustra/monotonicity.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "frustra/error.hpp"
#include "frustra/parallel.hpp"
#include "frustra/random.hpp"

namespace frustra {

PartialOrderPair order_from_spins(const NodeLayout& layout, std::span<const std::int8_t> spins) {
  if (static_cast<std::int64_t>(spins.size()) != layout.node_count) {
    throw ValidationError("spin vector has " + std::to_string(spins.size()) + " entries, graph has " +
                          std::to_string(layout.node_count) + " nodes");
  }
  const auto& in = layout.inputs();
  const auto& out = layout.outputs();
  return PartialOrderPair{{spins.begin() + in.begin, spins.begin() + in.end()},
                          {spins.begin() + out.begin, spins.begin() + out.end()},
                          OrderSource::ground_state};
}

PartialOrderPair random_order(std::int64_t n_inputs, std::int64_t n_outputs, std::uint64_t seed) {
  auto rng = make_rng(seed);
  PartialOrderPair p;
  p.source = OrderSource::random_null;
  p.s_x.resize(static_cast<std::size_t>(n_inputs));
  p.s_y.resize(static_cast<std::size_t>(n_outputs));
  for (auto& s : p.s_x) s = static_cast<std::int8_t>(random_sign(rng));
  for (auto& s : p.s_y) s = static_cast<std::int8_t>(random_sign(rng));
  return p;
}

std::vector<double> perturb(std::span<const double> x1, std::span<const std::int8_t> s_x, double magnitude,
                            std::uint64_t seed) {
  if (!(magnitude > 0.0) || !std::isfinite(magnitude)) throw ValidationError("perturbation magnitude must be > 0");
  if (x1.size() != s_x.size()) throw ValidationError("input and s_x lengths differ");
  if (x1.empty()) throw ValidationError("empty input");
  auto rng = make_rng(seed);
  const double hi = 2.0 * magnitude / std::sqrt(static_cast<double>(x1.size()));
  std::vector<double> delta(x1.size());
  double norm2 = 0.0;
  for (auto& d : delta) {
    d = (1.0 - uniform01(rng)) * hi;  // (0, hi]
    norm2 += d * d;
  }
  const double scale = magnitude / std::sqrt(norm2);
  std::vector<double> x2(x1.size());
  for (std::size_t k = 0; k < x1.size(); ++k) x2[k] = x1[k] + s_x[k] * (delta[k] * scale);
  return x2;
}

double omega(std::span<const double> y1, std::span<const double> y2, std::span<const std::int8_t> s_y) {
  if (y1.size() != y2.size() || y1.size() != s_y.size()) throw ValidationError("omega: length mismatch");
  if (y1.empty()) throw ValidationError("omega: empty output");
  std::size_t aligned = 0;
  for (std::size_t i = 0; i < y1.size(); ++i) {
    if (s_y[i] * (y2[i] - y1[i]) >= 0.0) ++aligned;
  }
  return static_cast<double>(aligned) / static_cast<double>(y1.size());
}

std::vector<double> OmegaSampleSet::omegas() const {
  std::vector<double> v;
  v.reserve(records.size());
  for (const auto& r : records) v.push_back(r.omega);
  return v;
}

double OmegaSampleSet::mean_omega() const {
  if (records.empty()) throw ValidationError("no omega samples");
  double s = 0.0;
  for (const auto& r : records) s += r.omega;
  return s / static_cast<double>(records.size());
}

double OmegaSampleSet::standard_error() const {
  if (records.size() < 2) throw ValidationError("standard error needs at least 2 samples");
  const double m = mean_omega();
  double ss = 0.0;
  for (const auto& r : records) ss += (r.omega - m) * (r.omega - m);
  const double n = static_cast<double>(records.size());
  return std::sqrt(ss / (n - 1.0) / n);
}

OmegaSampleSet run_protocol(const Network& net, const PartialOrderPair& order,
                            const std::vector<std::vector<double>>& images, const ProtocolConfig& config) {
  if (static_cast<std::int64_t>(order.s_x.size()) != net.input_size() ||
      static_cast<std::int64_t>(order.s_y.size()) != net.output_size()) {
    throw ValidationError("order pair does not match the model's input/output sizes");
  }
  if (config.per_image < 1 || config.magnitudes.empty()) {
    throw ValidationError("protocol needs per_image >= 1 and at least one magnitude");
  }
  const auto per = static_cast<std::size_t>(config.per_image);
  OmegaSampleSet set;
  set.records.resize(images.size() * per);
  parallel_for(images.size(), [&](std::size_t img) {
    const auto& x1 = images[img];
    ActivationTrace before;
    try {
      before = net.forward(x1);
    } catch (const Error& e) {
      throw NumericalError("image " + std::to_string(img) + ": " + e.what());
    }
    const auto image_seed = derive_seed(config.seed, static_cast<std::uint64_t>(img));
    for (std::size_t p = 0; p < per; ++p) {
      const auto pert_seed = derive_seed(image_seed, static_cast<std::uint64_t>(p));
      const PartialOrderPair* use = &order;
      PartialOrderPair fresh;
      if (order.source == OrderSource::random_null) {
        fresh = random_order(net.input_size(), net.output_size(), derive_seed(pert_seed, "order"));
        use = &fresh;
      }
      OmegaRecord& r = set.records[img * per + p];
      r.image = static_cast<std::int64_t>(img);
      r.perturbation = static_cast<std::int64_t>(p);
      r.magnitude = config.magnitudes[p % config.magnitudes.size()];
      const auto x2 = perturb(x1, use->s_x, r.magnitude, derive_seed(pert_seed, "delta"));
      double n2 = 0.0;
      for (std::size_t k = 0; k < x2.size(); ++k) n2 += (x2[k] - x1[k]) * (x2[k] - x1[k]);
      r.delta_norm = std::sqrt(n2);
      ActivationTrace after;
      try {
        after = net.forward(x2);
      } catch (const Error& e) {
        throw NumericalError("image " + std::to_string(img) + ": " + e.what());
      }
      r.omega = omega(before.logits, after.logits, use->s_y);
      r.class_before = before.predicted_class;
      r.class_after = after.predicted_class;
    }
  });
  return set;
}

LambdaResult lambda_from_samples(std::span<const double> omegas) {
  if (omegas.empty()) throw ValidationError("lambda needs at least one sample");
  std::vector<double> d;
  d.reserve(omegas.size());
  for (auto w : omegas) {
    if (!(w >= 0.0 && w <= 1.0)) throw ValidationError("omega outside [0, 1]");
    d.push_back(std::abs(w - 0.5));
  }
  std::sort(d.begin(), d.end(), std::greater<>());
  const double n = static_cast<double>(d.size());
  LambdaResult r;
  for (std::size_t k = 1; k <= d.size(); ++k) {
    r.lambda = std::max(r.lambda, std::min(d[k - 1], static_cast<double>(k) / (2.0 * n)));
    if (k == d.size() || d[k] != d[k - 1]) r.ccdf.emplace_back(d[k - 1], static_cast<double>(k) / n);
  }
  return r;
}

LambdaResult lambda_from_samples(const OmegaSampleSet& samples) {
  const auto v = samples.omegas();
  return lambda_from_samples(v);
}

std::vector<ImageConsistency> direction_consistency(const OmegaSampleSet& samples) {
  std::map<std::int64_t, std::pair<std::int64_t, std::int64_t>> counts;
  for (const auto& r : samples.records) {
    auto& [above, total] = counts[r.image];
    above += r.omega > 0.5;
    ++total;
  }
  std::vector<ImageConsistency> out;
  for (const auto& [img, c] : counts) {
    out.push_back({img, static_cast<double>(c.first) / static_cast<double>(c.second)});
  }
  return out;
}

std::vector<MagnitudeStability> class_stability(const OmegaSampleSet& samples) {
  std::map<double, std::pair<std::int64_t, std::int64_t>> counts;
  for (const auto& r : samples.records) {
    auto& [same, total] = counts[r.magnitude];
    same += r.class_before == r.class_after;
    ++total;
  }
  std::vector<MagnitudeStability> out;
  for (const auto& [m, c] : counts) {
    out.push_back({m, c.second, static_cast<double>(c.first) / static_cast<double>(c.second)});
  }
  return out;
}

}  // namespace frustra
