#include <doctest.h>

#include <cmath>
#include <numeric>

#include "frustra/error.hpp"
#include "frustra/graph_builder.hpp"
#include "frustra/monotonicity.hpp"
#include "frustra/random.hpp"
#include "frustra/synthetic.hpp"

using namespace frustra;

TEST_CASE("perturbation follows s_x and has the requested norm") {
  std::vector<double> x(100, 0.5);
  std::vector<std::int8_t> sx(100, 1);
  for (std::size_t i = 0; i < 100; i += 3) sx[i] = -1;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto x2 = perturb(x, sx, 4.0, seed);
    double norm = 0.0;
    for (std::size_t i = 0; i < 100; ++i) {
      const double d = x2[i] - x[i];
      CHECK(sx[i] * d > 0.0);
      norm += d * d;
    }
    CHECK(std::sqrt(norm) >= 3.9);
    CHECK(std::sqrt(norm) <= 4.1);
  }
  CHECK_THROWS_AS(perturb(x, sx, 0.0, 0), ValidationError);
  CHECK_THROWS_AS(perturb(x, sx, -1.0, 0), ValidationError);
}

TEST_CASE("omega examples") {
  const std::vector<std::int8_t> pos{1, 1, 1}, mixed{1, -1, 1};
  CHECK(omega(std::vector<double>{0, 0, 0}, std::vector<double>{1, 1, 1}, pos) == 1.0);
  CHECK(omega(std::vector<double>{0, 0, 0}, std::vector<double>{1, 1, 1}, mixed) == doctest::Approx(2.0 / 3.0));
  CHECK(omega(std::vector<double>{1, 1, 1}, std::vector<double>{1, 1, 1}, mixed) == 1.0);
}

TEST_CASE("omega of swapped outputs sums to at least one") {
  auto rng = make_rng(2);
  for (int k = 0; k < 50; ++k) {
    std::vector<double> a(7), b(7);
    std::vector<std::int8_t> s(7);
    for (int i = 0; i < 7; ++i) {
      a[i] = uniform01(rng);
      b[i] = i == 3 ? a[i] : uniform01(rng);
      s[i] = static_cast<std::int8_t>(random_sign(rng));
    }
    CHECK(omega(a, b, s) + omega(b, a, s) == doctest::Approx(1.0 + 1.0 / 7.0));
  }
}

TEST_CASE("lambda examples") {
  CHECK(lambda_from_samples(std::vector<double>(10, 1.0)).lambda == 0.5);
  CHECK(lambda_from_samples(std::vector<double>(10, 0.5)).lambda == 0.0);
  std::vector<double> half(10, 0.9);
  std::fill(half.begin() + 5, half.end(), 0.1);
  CHECK(lambda_from_samples(half).lambda == doctest::Approx(0.4).epsilon(1e-12));
  CHECK_THROWS_AS(lambda_from_samples(std::vector<double>{}), ValidationError);
}

TEST_CASE("lambda is symmetric under Omega -> 1 - Omega") {
  auto rng = make_rng(5);
  std::vector<double> w(200), flipped(200);
  for (int i = 0; i < 200; ++i) {
    w[i] = std::round(uniform01(rng) * 40.0) / 40.0;
    flipped[i] = 1.0 - w[i];
  }
  auto a = lambda_from_samples(w);
  auto b = lambda_from_samples(flipped);
  CHECK(a.lambda == doctest::Approx(b.lambda).epsilon(1e-12));
  // ccdf is descending in d and ascending in probability
  for (std::size_t k = 1; k < a.ccdf.size(); ++k) {
    CHECK(a.ccdf[k].first < a.ccdf[k - 1].first);
    CHECK(a.ccdf[k].second > a.ccdf[k - 1].second);
  }
  CHECK(a.ccdf.back().second == 1.0);
}

TEST_CASE("direction consistency and class stability") {
  OmegaSampleSet one{{{0, 0, 1.0, 1.0, 0.7, 2, 2}, {1, 0, 1.0, 1.0, 0.3, 1, 4}}};
  auto dc = direction_consistency(one);
  REQUIRE(dc.size() == 2);
  CHECK(dc[0].fraction == 1.0);
  CHECK(dc[1].fraction == 0.0);
  auto cs = class_stability(one);
  REQUIRE(cs.size() == 1);
  CHECK(cs[0].count == 2);
  CHECK(cs[0].fraction == 0.5);
}

TEST_CASE("protocol on a small network") {
  auto m = generate_synthetic(1, SyntheticTemplate::tiny_mlp);
  Network net(m.manifest, m.store);
  std::vector<std::vector<double>> images;
  for (std::uint64_t i = 0; i < 4; ++i) images.push_back(random_input(m.manifest.input_shape(), i));
  auto order = random_order(net.input_size(), net.output_size(), 3);
  order.source = OrderSource::ground_state;
  ProtocolConfig cfg;
  cfg.per_image = 8;
  cfg.seed = 12;
  auto a = run_protocol(net, order, images, cfg);
  auto b = run_protocol(net, order, images, cfg);
  REQUIRE(a.records.size() == 32);
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    CHECK(a.records[k].omega == b.records[k].omega);
    CHECK(a.records[k].magnitude == cfg.magnitudes[a.records[k].perturbation % 4]);
  }

  SUBCASE("tiny perturbations keep the class") {
    cfg.magnitudes = {1e-12};
    auto s = class_stability(run_protocol(net, order, images, cfg));
    REQUIRE(s.size() == 1);
    CHECK(s[0].fraction == 1.0);
  }
  SUBCASE("size mismatch") {
    auto bad = random_order(net.input_size() + 1, net.output_size(), 3);
    CHECK_THROWS_AS(run_protocol(net, bad, images, cfg), ValidationError);
  }
}

TEST_CASE("random order on the large output gives per-image fractions away from 0 and 1") {
  auto m = generate_synthetic(1, SyntheticTemplate::tiny_cnn);
  Network net(m.manifest, m.store);
  std::vector<std::vector<double>> images;
  for (std::uint64_t i = 0; i < 10; ++i) images.push_back(random_input(m.manifest.input_shape(), 100 + i));
  auto order = random_order(net.input_size(), net.output_size(), 0);
  ProtocolConfig cfg;
  cfg.seed = 4;
  auto s = run_protocol(net, order, images, cfg);
  const double mean = s.mean_omega();
  CHECK(std::abs(mean - 0.5) <= 3.0 * s.standard_error());
  int middling = 0;
  auto dc = direction_consistency(s);
  for (const auto& d : dc) middling += d.fraction > 0.1 && d.fraction < 0.9;
  CHECK(middling > static_cast<int>(dc.size()) / 2);
}
