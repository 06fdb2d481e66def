#include <doctest.h>

#include "graphs.hpp"
#include "oracles.hpp"
#include "frustra/error.hpp"
#include "frustra/frustration.hpp"

using namespace frustra;

namespace {

SignedSparseGraph triangle() {
  return testgraphs::from_edges(3, {{1, 0, 1.0, {}}, {2, 1, 1.0, {}}, {2, 0, -1.0, {}}});
}

SignedSparseGraph four_cycle() {
  return testgraphs::from_edges(4, {{1, 0, 1.0, {}}, {2, 1, 1.0, {}}, {3, 2, 1.0, {}}, {3, 0, -1.0, {}}});
}

}  // namespace

TEST_CASE("energy of small assignments") {
  SymmetrizedView pos(testgraphs::from_edges(2, {{1, 0, 1.0, {}}}));
  SymmetrizedView neg(testgraphs::from_edges(2, {{1, 0, -1.0, {}}}));
  CHECK(energy(pos, SpinVector{1, 1}) == 0.0);
  CHECK(energy(neg, SpinVector{1, 1}) == 1.0);
  CHECK(energy(neg, SpinVector{1, -1}) == 0.0);
  CHECK(energy(SymmetrizedView(triangle()), SpinVector{1, 1, 1}) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("energy matches the literal quadratic form") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto g = testgraphs::random_graph(9, 0.5, true, seed);
    if (g.edge_count() == 0) continue;
    SymmetrizedView v(g);
    auto dense = oracle::dense_symmetric(g);
    auto rng = make_rng(seed);
    SpinVector s(9);
    std::vector<int> si(9);
    for (int i = 0; i < 9; ++i) si[i] = s[i] = static_cast<std::int8_t>(random_sign(rng));
    const double e = energy(v, s);
    CHECK(e == doctest::Approx(oracle::energy(dense, si)).epsilon(1e-12));
    CHECK(e >= 0.0);
    CHECK(e <= 1.0);
    // global flip symmetry
    for (auto& x : s) x = static_cast<std::int8_t>(-x);
    CHECK(energy(v, s) == doctest::Approx(e).epsilon(1e-14));
  }
}

TEST_CASE("graph without edges is a numerical error") {
  SymmetrizedView v(testgraphs::from_edges(3, {}));
  CHECK_THROWS_AS(energy(v, SpinVector{1, 1, 1}), NumericalError);
  CHECK_THROWS_AS(heuristic_ground_state(v, {}), NumericalError);
  CHECK_THROWS_AS(brute_force_frustration(v), NumericalError);
}

TEST_CASE("spin flip is an involution and tracks row sums") {
  auto g = testgraphs::random_graph(12, 0.4, true, 3);
  SymmetrizedView v(g);
  auto dense = oracle::dense_symmetric(g);
  SpinState st(v, SpinVector(12, 1));
  const std::vector<double> before(st.row_sums().begin(), st.row_sums().end());
  st.flip(5);
  st.flip(5);
  for (int i = 0; i < 12; ++i) CHECK(st.row_sums()[i] == doctest::Approx(before[i]).epsilon(1e-12));
  auto rng = make_rng(8);
  for (int k = 0; k < 40; ++k) st.flip(static_cast<std::int64_t>(uniform_index(rng, 12)));
  std::vector<int> s(st.spins().begin(), st.spins().end());
  auto want = oracle::row_sums(dense, s);
  for (int i = 0; i < 12; ++i) CHECK(st.row_sums()[i] == doctest::Approx(want[i]).epsilon(1e-9));
  CHECK(st.energy() == doctest::Approx(oracle::energy(dense, s)).epsilon(1e-12));
}

TEST_CASE("flipping an isolated node changes nothing") {
  auto g = testgraphs::from_edges(3, {{1, 0, -1.0, {}}});
  SymmetrizedView v(g);
  SpinState st(v, SpinVector{1, 1, 1});
  const double e = st.energy();
  st.flip(2);
  CHECK(st.energy() == e);
  CHECK(st.row_sums()[2] == 0.0);
}

TEST_CASE("closed cases") {
  SymmetrizedView tri(triangle());
  SymmetrizedView cyc(four_cycle());
  CHECK(brute_force_frustration(tri).epsilon == doctest::Approx(1.0 / 3.0));
  CHECK(brute_force_frustration(cyc).epsilon == doctest::Approx(0.25));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    HeuristicOptions opt;
    opt.seed = seed;
    opt.initial_flips = 7;
    CHECK(heuristic_ground_state(tri, opt).epsilon == doctest::Approx(1.0 / 3.0));
    CHECK(heuristic_ground_state(cyc, opt).epsilon == doctest::Approx(0.25));
  }
}

TEST_CASE("brute force is gauge invariant and respects its cap") {
  auto g = testgraphs::random_graph(10, 0.5, true, 11);
  auto rng = make_rng(4);
  std::vector<int> t(10);
  for (auto& x : t) x = random_sign(rng);
  std::vector<Triplet> conj;
  const auto rows = g.edge_rows();
  for (std::int64_t e = 0; e < g.edge_count(); ++e) {
    const auto r = rows[e], c = g.cols()[e];
    conj.push_back({r, c, g.weights()[e] * t[r] * t[c], {}});
  }
  auto h = testgraphs::from_edges(10, conj);
  CHECK(brute_force_frustration(SymmetrizedView(g)).epsilon ==
        doctest::Approx(brute_force_frustration(SymmetrizedView(h)).epsilon).epsilon(1e-12));
  CHECK_THROWS_AS(brute_force_frustration(SymmetrizedView(g), 8), ValidationError);
}

TEST_CASE("balanced graphs reach zero from any start") {
  std::vector<int> gauge;
  auto g = testgraphs::gauged_graph(300, 4.0, 2, &gauge);
  SymmetrizedView v(g);
  ReplicaConfig cfg;
  cfg.replica_count = 4;
  cfg.initial_flips = 2000;
  cfg.seed = 1;
  auto set = run_replicas(v, cfg);
  for (const auto& r : set.replicas) CHECK(r.epsilon == 0.0);
}

TEST_CASE("domain moves leave the single-flip local minimum of a wall") {
  // Path x-a-b-y with weights 2,1,2. Spins (+,+,-,-) frustrate only a-b and
  // every row sum is positive, so single flips cannot continue.
  auto g = testgraphs::from_edges(4, {{1, 0, 2.0, {}}, {2, 1, 1.0, {}}, {3, 2, 2.0, {}}});
  SymmetrizedView v(g);
  SpinState st(v, SpinVector{1, 1, -1, -1});
  for (auto r : st.row_sums()) CHECK(r > 0.0);
  CHECK(st.energy() == doctest::Approx(0.2));

  bool found = false;
  for (std::uint64_t seed = 0; seed < 500 && !found; ++seed) {
    HeuristicOptions opt;
    opt.seed = seed;
    opt.initial_flips = 2;
    opt.domain_moves = false;
    if (heuristic_ground_state(v, opt).epsilon < 0.1) continue;
    found = true;
    opt.domain_moves = true;
    auto with = heuristic_ground_state(v, opt);
    CHECK(with.epsilon == 0.0);
    CHECK(with.domain_rounds >= 1);
  }
  CHECK(found);
}

TEST_CASE("replicas are deterministic and best is the minimum") {
  auto g = testgraphs::random_graph(40, 0.2, true, 6);
  SymmetrizedView v(g);
  ReplicaConfig cfg;
  cfg.replica_count = 6;
  cfg.initial_flips = 200;
  cfg.seed = 21;
  auto a = run_replicas(v, cfg);
  auto b = run_replicas(v, cfg);
  REQUIRE(a.replicas.size() == 6);
  for (std::size_t r = 0; r < 6; ++r) {
    CHECK(a.replicas[r].epsilon == b.replicas[r].epsilon);
    CHECK(a.replicas[r].spins == b.replicas[r].spins);
    CHECK(a.replicas[r].seed == (21u ^ r));
    CHECK(a.best_result().epsilon <= a.replicas[r].epsilon);
  }
  CHECK(a.best == b.best);

  HeuristicOptions one;
  one.seed = 21;
  one.initial_flips = 200;
  CHECK(heuristic_ground_state(v, one).epsilon == a.replicas[0].epsilon);
}

TEST_CASE("iteration cap stops the descent") {
  auto g = testgraphs::random_graph(60, 0.3, false, 2);
  SymmetrizedView v(g);
  HeuristicOptions opt;
  opt.initial_flips = 500;
  opt.max_iterations = 3;
  auto r = heuristic_ground_state(v, opt);
  CHECK(r.flips + r.domain_rounds <= 3);
  CHECK_FALSE(r.converged);
}

TEST_CASE("active frustration of a path is zero") {
  auto g = testgraphs::from_edges(3, {{1, 0, -1.0, {}}, {2, 1, 0.3, {}}});
  ReplicaConfig cfg;
  cfg.replica_count = 2;
  cfg.initial_flips = 10;
  CHECK(active_frustration(g, cfg).epsilon == 0.0);
  CHECK_THROWS_AS(active_frustration(testgraphs::from_edges(2, {}), cfg), NumericalError);
}
