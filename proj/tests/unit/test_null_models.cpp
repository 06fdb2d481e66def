#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "builders.hpp"
#include "frustra/error.hpp"
#include "frustra/graph_builder.hpp"
#include "frustra/null_models.hpp"
#include "frustra/synthetic.hpp"

using namespace frustra;

namespace {

// One value per parameter slot of each conv/dense layer.
std::map<std::int32_t, std::vector<double>> slot_values(const SignedSparseGraph& g) {
  std::map<std::int32_t, std::map<std::int64_t, double>> slots;
  for (std::int64_t e = 0; e < g.edge_count(); ++e) {
    const auto p = g.provenance()[e];
    if (p.param >= 0) slots[p.layer][p.param] = g.weights()[e];
  }
  std::map<std::int32_t, std::vector<double>> out;
  for (const auto& [layer, m] : slots) {
    for (const auto& [slot, w] : m) out[layer].push_back(w);
    std::sort(out[layer].begin(), out[layer].end());
  }
  return out;
}

std::vector<double> shuffled_weights(const SignedSparseGraph& g) {
  std::vector<double> v;
  for (std::size_t e = 0; e < static_cast<std::size_t>(g.edge_count()); ++e)
    if (is_shuffled_edge(g, e)) v.push_back(g.weights()[e]);
  std::sort(v.begin(), v.end());
  return v;
}

bool same_structure(const SignedSparseGraph& a, const SignedSparseGraph& b) {
  return std::ranges::equal(a.row_ptr(), b.row_ptr()) && std::ranges::equal(a.cols(), b.cols()) &&
         std::ranges::equal(a.provenance(), b.provenance());
}

}  // namespace

TEST_CASE("N1 on a two-tap kernel keeps copies consistent") {
  WeightStore store;
  store.put("c.w", build::blob({1, 2, 1, 1}, {0.25f, -0.75f}));
  auto m = build::model(TensorShape{1, 6, 1}, {build::layer("in", LayerKind::input), build::conv("c", "in", 1, 2, 1)},
                        store);
  auto g = assemble(m.manifest, m.store);
  bool swapped = false;
  for (std::uint64_t seed = 0; seed < 16; ++seed) {
    auto h = n1_shuffle(g, seed);
    CHECK(same_structure(g, h));
    std::map<std::int64_t, std::set<double>> per_param;
    for (std::int64_t e = 0; e < h.edge_count(); ++e) per_param[h.provenance()[e].param].insert(h.weights()[e]);
    REQUIRE(per_param.size() == 2);
    CHECK(per_param[0].size() == 1);
    CHECK(per_param[1].size() == 1);
    std::set<double> values{*per_param[0].begin(), *per_param[1].begin()};
    CHECK(values == std::set<double>{0.25, -0.75});
    swapped = swapped || *per_param[0].begin() == -0.75;
  }
  CHECK(swapped);
}

TEST_CASE("N1 and N2 conserve what they should") {
  auto m = generate_synthetic(1, SyntheticTemplate::tiny_cnn);
  auto g = assemble(m.manifest, m.store);
  auto n1 = n1_shuffle(g, 5);
  auto n2 = n2_shuffle(g, 5);
  CHECK(same_structure(g, n1));
  CHECK(same_structure(g, n2));
  CHECK(slot_values(n1) == slot_values(g));
  CHECK(shuffled_weights(n2) == shuffled_weights(g));
  for (std::size_t e = 0; e < static_cast<std::size_t>(g.edge_count()); ++e) {
    if (!is_shuffled_edge(g, e)) {
      REQUIRE(n1.weights()[e] == g.weights()[e]);
      REQUIRE(n2.weights()[e] == g.weights()[e]);
    }
  }
  // N2 breaks weight sharing somewhere
  std::map<std::pair<std::int32_t, std::int64_t>, std::set<double>> classes;
  for (std::int64_t e = 0; e < n2.edge_count(); ++e) {
    const auto p = n2.provenance()[e];
    if (p.param >= 0) classes[{p.layer, p.param}].insert(n2.weights()[e]);
  }
  CHECK(std::ranges::any_of(classes, [](const auto& kv) { return kv.second.size() > 1; }));
  CHECK(n1_shuffle(g, 5) == n1);
  CHECK(n2_shuffle(g, 5) == n2);
  CHECK_FALSE(n2_shuffle(g, 6) == n2);
}

TEST_CASE("N1 needs provenance") {
  WeightStore store;
  store.put("d.w", build::blob({2, 2}, {1, 2, 3, 4}));
  auto m = build::model(TensorShape{2}, {build::layer("in", LayerKind::input), build::dense("d", "in", 2, false)}, store);
  auto g = assemble(m.manifest, m.store);
  std::vector<EdgeProvenance> prov(g.provenance().begin(), g.provenance().end());
  prov[0].param = -1;
  SignedSparseGraph broken(g.node_count(), {g.row_ptr().begin(), g.row_ptr().end()}, {g.cols().begin(), g.cols().end()},
                           {g.weights().begin(), g.weights().end()}, prov,
                           {g.layers().begin(), g.layers().end()});
  CHECK_THROWS_AS(n1_shuffle(broken, 0), ValidationError);
}

TEST_CASE("init scales") {
  CHECK(xavier_bound({4.0, 6.0}) == doctest::Approx(std::sqrt(0.6)));
  CHECK(xavier_bound({4.0, 6.0}) == doctest::Approx(0.7746).epsilon(1e-4));
  CHECK(he_stddev({8.0, 1.0}) == doctest::Approx(0.5));
  auto conv = build::conv("c", "in", 3, 3, 16);
  auto fans = fan_counts(conv, TensorShape{8, 8, 4});
  CHECK(fans.fan_in == 36.0);
  CHECK(fans.fan_out == 144.0);
}

TEST_CASE("N3 draws follow the requested scheme") {
  WeightStore store;
  store.put("d.w", build::blob({400, 250}, std::vector<float>(100000, 1.0f)));
  store.put("d.b", build::blob({400}, std::vector<float>(400, 1.0f)));
  auto m = build::model(TensorShape{250}, {build::layer("in", LayerKind::input), build::dense("d", "in", 400)}, store);

  NullModelSpec he{NullKind::n3, 3, InitScheme::he_normal};
  auto out = n3_reinit(m.manifest, m.store, he);
  const auto& w = out.get("d.w").values;
  const double sigma = std::sqrt(2.0 / 250.0);
  double sum = 0.0, sq = 0.0;
  for (float v : w) {
    sum += v;
    sq += static_cast<double>(v) * v;
  }
  const double n = static_cast<double>(w.size());
  CHECK(std::abs(sum / n) <= 3.0 * sigma / std::sqrt(n));
  CHECK(std::sqrt(sq / n) == doctest::Approx(sigma).epsilon(0.02));
  for (float b : out.get("d.b").values) CHECK(b == 0.0f);

  NullModelSpec xa{NullKind::n3, 3, InitScheme::xavier_uniform};
  auto ux = n3_reinit(m.manifest, m.store, xa);
  const double a = std::sqrt(6.0 / 650.0);
  const auto [lo, hi] = std::ranges::minmax(ux.get("d.w").values);
  CHECK(lo >= -a);
  CHECK(hi <= a);
  CHECK(hi > 0.99 * a);
  CHECK(std::ranges::none_of(ux.get("d.w").values, [](float v) { return v == 0.0f; }));
}

TEST_CASE("N3 keeps topology, pooling and batch norm") {
  auto m = generate_synthetic(1, SyntheticTemplate::tiny_cnn);
  auto g = assemble(m.manifest, m.store);
  NullModelSpec spec{NullKind::n3, 9, InitScheme::xavier_uniform};
  auto store = n3_reinit(m.manifest, m.store, spec);
  auto h = assemble(m.manifest, store);
  CHECK(same_structure(g, h));
  for (std::size_t e = 0; e < static_cast<std::size_t>(g.edge_count()); ++e)
    if (!is_shuffled_edge(g, e)) REQUIRE(h.weights()[e] == g.weights()[e]);
  for (const auto& l : m.manifest.layers())
    if (l.kind == LayerKind::batch_norm) CHECK(store.get(*l.weight_ref) == m.store.get(*l.weight_ref));
  CHECK(n3_reinit(m.manifest, m.store, spec) == store);
}

TEST_CASE("null spec validation") {
  CHECK_THROWS_AS((NullModelSpec{NullKind::n3, 0, std::nullopt}.validate()), ValidationError);
  CHECK_THROWS_AS((NullModelSpec{NullKind::n1, 0, InitScheme::he_normal}.validate()), ValidationError);
  CHECK(parse_null_kind("n2") == NullKind::n2);
  CHECK(parse_init_scheme("he") == InitScheme::he_normal);
  CHECK_THROWS_AS(parse_null_kind("n4"), ValidationError);
}
