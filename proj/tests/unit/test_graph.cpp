#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <tuple>

#include "builders.hpp"
#include "graphs.hpp"
#include "oracles.hpp"
#include "frustra/error.hpp"
#include "frustra/graph.hpp"
#include "frustra/graph_builder.hpp"
#include "frustra/graph_io.hpp"
#include "frustra/synthetic.hpp"

using namespace frustra;

namespace {

using Entry = std::tuple<std::int64_t, std::int64_t, double>;

std::set<Entry> entries(const EdgeBlock& b) {
  std::set<Entry> s;
  for (std::size_t e = 0; e < b.size(); ++e) s.emplace(b.rows[e], b.cols[e], b.weights[e]);
  return s;
}

}  // namespace

TEST_CASE("1-D convolution is a Toeplitz band") {
  auto l = build::conv("c", "in", 1, 2, 1);
  auto w = build::blob({1, 2, 1, 1}, {2.0f, -3.0f});
  auto b = expand_conv(l, w, TensorShape{1, 4, 1});
  CHECK(entries(b) == std::set<Entry>{{0, 0, 2.0}, {0, 1, -3.0}, {1, 1, 2.0}, {1, 2, -3.0}, {2, 2, 2.0}, {2, 3, -3.0}});
}

TEST_CASE("padding drops edges to padded positions") {
  auto l = build::conv("c", "in", 1, 3, 1, Padding2d{0, 0, 1, 1});
  auto w = build::blob({1, 3, 1, 1}, {1.0f, 2.0f, 3.0f});
  auto b = expand_conv(l, w, TensorShape{1, 4, 1});
  // outputs 0..3; the first row sees (pad, x0, x1), the last (x2, x3, pad)
  CHECK(entries(b) == std::set<Entry>{{0, 0, 2.0}, {0, 1, 3.0}, {1, 0, 1.0}, {1, 1, 2.0}, {1, 2, 3.0},
                                      {2, 1, 1.0}, {2, 2, 2.0}, {2, 3, 3.0}, {3, 2, 1.0}, {3, 3, 2.0}});
}

TEST_CASE("3x3 kernel on 5x5 with stride 2") {
  auto l = build::conv("c", "in", 3, 3, 1, {}, 2);
  auto w = build::blob({3, 3, 1, 1}, std::vector<float>(9, 1.0f));
  auto b = expand_conv(l, w, TensorShape{5, 5, 1});
  CHECK(b.size() == 36);
  CHECK(static_cast<std::int64_t>(b.size()) == oracle::window_edges(l, TensorShape{5, 5, 1}, 1, 1));
  std::set<std::int64_t> rows(b.rows.begin(), b.rows.end());
  CHECK(rows.size() == 4);
}

TEST_CASE("zero weights produce no edges") {
  auto l = build::conv("c", "in", 1, 2, 1);
  auto b = expand_conv(l, build::blob({1, 2, 1, 1}, {0.0f, 1.0f}), TensorShape{1, 4, 1});
  CHECK(b.size() == 3);
}

TEST_CASE("grouped 1x1 identity is block diagonal and shuffle permutes rows") {
  auto l = build::conv("g", "in", 1, 1, 4);
  l.kind = LayerKind::grouped_conv;
  l.params.groups = 2;
  // weight shape (1,1,2,4): identity inside each group
  std::vector<float> w(8, 0.0f);
  for (std::int64_t f = 0; f < 4; ++f) w[static_cast<std::size_t>((f % 2) * 4 + f)] = 1.0f;
  auto blob = build::blob({1, 1, 2, 4}, w);
  auto plain = expand_grouped_conv(l, blob, TensorShape{1, 1, 4});
  CHECK(entries(plain) == std::set<Entry>{{0, 0, 1.0}, {1, 1, 1.0}, {2, 2, 1.0}, {3, 3, 1.0}});

  l.params.shuffle = true;
  auto shuffled = expand_grouped_conv(l, blob, TensorShape{1, 1, 4});
  // filter f lands in row shuffled_channel(f): (0,1,2,3) -> (0,2,1,3)
  CHECK(entries(shuffled) == std::set<Entry>{{0, 0, 1.0}, {2, 1, 1.0}, {1, 2, 1.0}, {3, 3, 1.0}});
}

TEST_CASE("grouped conv with one group equals the plain conv") {
  auto m = generate_synthetic(2, SyntheticTemplate::tiny_cnn);
  const auto i = m.manifest.index_of("conv1");
  const auto& l = m.manifest.layer(i);
  const auto& in = m.manifest.shape(m.manifest.inputs_of(i)[0]);
  auto a = expand_conv(l, m.store.get(*l.weight_ref), in);
  auto b = expand_grouped_conv(l, m.store.get(*l.weight_ref), in);
  CHECK(a.rows == b.rows);
  CHECK(a.cols == b.cols);
  CHECK(a.weights == b.weights);
}

TEST_CASE("channel count not divisible by groups") {
  auto l = build::conv("g", "in", 1, 1, 4);
  l.kind = LayerKind::grouped_conv;
  l.params.groups = 3;
  CHECK_THROWS_AS(expand_grouped_conv(l, build::blob({1, 1, 1, 4}, std::vector<float>(4, 1.0f)), TensorShape{1, 1, 4}),
                  ValidationError);
}

TEST_CASE("pooling edges") {
  SUBCASE("2x2 window has weight 0.005") {
    auto b = expand_pool(build::pool("p", LayerKind::max_pool, "in", 2, 2), TensorShape{4, 4, 2});
    CHECK(b.size() == 4 * 4 * 2);
    for (double w : b.weights) CHECK(w == doctest::Approx(0.005).epsilon(1e-15));
    CHECK(pool_edge_weight({2, 2}) == doctest::Approx(0.005).epsilon(1e-15));
  }
  SUBCASE("3x3 interior window has 9 edges of 0.01/3") {
    auto l = build::pool("p", LayerKind::avg_pool, "in", 3, 3);
    l.params.stride = {1, 1};
    auto b = expand_pool(l, TensorShape{5, 5, 1});
    std::map<std::int64_t, int> per_row;
    for (auto r : b.rows) ++per_row[r];
    for (auto [r, n] : per_row) CHECK(n == 9);
    CHECK(b.weights.front() == doctest::Approx(0.01 / 3.0).epsilon(1e-15));
  }
  SUBCASE("1x1 window is a scaled identity") {
    auto b = expand_pool(build::pool("p", LayerKind::max_pool, "in", 1, 1), TensorShape{2, 2, 3});
    CHECK(b.size() == 12);
    for (std::size_t e = 0; e < b.size(); ++e) {
      CHECK(b.rows[e] == b.cols[e]);
      CHECK(b.weights[e] == doctest::Approx(0.01).epsilon(1e-15));
    }
  }
}

TEST_CASE("dense chain has the block sub-diagonal layout") {
  WeightStore store;
  store.put("a.w", build::blob({3, 2}, {1, 2, 3, 4, 5, 6}));
  store.put("b.w", build::blob({2, 3}, {-1, -2, -3, -4, -5, -6}));
  auto m = build::model(TensorShape{2},
                        {build::layer("in", LayerKind::input), build::dense("a", "in", 3, false),
                         build::dense("b", "a", 2, false)},
                        store);
  auto g = assemble(m.manifest, m.store);
  CHECK(g.node_count() == 7);
  CHECK(g.edge_count() == 12);
  CHECK(g.is_lower_triangular());
  auto a = oracle::dense_symmetric(g);
  // A[2 + o][i] = W1[o][i], A[5 + o][2 + i] = W2[o][i], nothing else
  for (std::int64_t o = 0; o < 3; ++o)
    for (std::int64_t i = 0; i < 2; ++i) CHECK(a[2 + o][i] == store.get("a.w").values[o * 2 + i]);
  for (std::int64_t o = 0; o < 2; ++o)
    for (std::int64_t i = 0; i < 3; ++i) CHECK(a[5 + o][2 + i] == store.get("b.w").values[o * 3 + i]);
  CHECK(a[5][0] == 0.0);
  CHECK(g.layers().size() == 3);
}

TEST_CASE("residual network has skip edges between non-adjacent blocks") {
  auto m = generate_synthetic(1, SyntheticTemplate::residual_cnn);
  auto g = assemble(m.manifest, m.store);
  auto layout = compute_layout(m.manifest);
  CHECK(g.is_lower_triangular());
  std::int64_t add_block = -1;
  for (std::size_t b = 0; b < layout.blocks.size(); ++b)
    if (layout.blocks[b].kind == LayerKind::add) add_block = static_cast<std::int64_t>(b);
  REQUIRE(add_block > 1);
  const auto& blk = layout.blocks[static_cast<std::size_t>(add_block)];
  std::set<std::int64_t> source_blocks;
  for (auto r = blk.begin; r < blk.end(); ++r) {
    for (auto c : g.row_cols(r)) {
      for (std::size_t b = 0; b < layout.blocks.size(); ++b)
        if (c >= layout.blocks[b].begin && c < layout.blocks[b].end()) source_blocks.insert(static_cast<std::int64_t>(b));
    }
    for (auto w : g.row_weights(r)) CHECK(w == 1.0);
    CHECK(g.row_cols(r).size() == 2);
  }
  CHECK(source_blocks.size() == 2);
  CHECK(*source_blocks.begin() < add_block - 1);
}

TEST_CASE("edge counts match receptive field enumeration") {
  for (auto t : {SyntheticTemplate::tiny_cnn, SyntheticTemplate::grouped_cnn}) {
    auto m = generate_synthetic(1, t);
    // dense matrices with no zero entry: synthetic weights are nonzero
    std::int64_t expected = 0;
    for (std::size_t i = 0; i < m.manifest.layer_count(); ++i) {
      const auto& l = m.manifest.layer(i);
      if (l.kind == LayerKind::input || !owns_nodes(l.kind)) continue;
      const auto ins = m.manifest.inputs_of(i);
      const auto& in = m.manifest.shape(ins[0]);
      switch (l.kind) {
        case LayerKind::conv:
        case LayerKind::grouped_conv:
          expected += oracle::window_edges(l, in, in.channels() / l.params.groups, l.params.filters);
          break;
        case LayerKind::max_pool:
        case LayerKind::avg_pool:
          expected += oracle::window_edges(l, in, 1, in.channels());
          break;
        case LayerKind::dense: expected += in.size() * l.params.units; break;
        case LayerKind::add: expected += static_cast<std::int64_t>(ins.size()) * in.size(); break;
        default: break;
      }
    }
    auto g = assemble(m.manifest, m.store);
    CHECK(g.edge_count() == expected);
  }
}

TEST_CASE("Toeplitz copies of one parameter carry one weight") {
  auto m = generate_synthetic(1, SyntheticTemplate::grouped_cnn);
  auto g = assemble(m.manifest, m.store);
  std::map<std::pair<std::int32_t, std::int64_t>, double> seen;
  for (std::int64_t e = 0; e < g.edge_count(); ++e) {
    const auto p = g.provenance()[e];
    if (p.param < 0) continue;
    auto [it, fresh] = seen.emplace(std::pair{p.layer, p.param}, g.weights()[e]);
    if (!fresh) REQUIRE(it->second == g.weights()[e]);
  }
  CHECK(!seen.empty());
}

TEST_CASE("assembly is deterministic and survives a file round trip") {
  auto m = generate_synthetic(9, SyntheticTemplate::tiny_cnn);
  auto a = assemble(m.manifest, m.store);
  auto b = assemble(m.manifest, m.store);
  CHECK(a == b);
  auto path = std::filesystem::temp_directory_path() / "frustra_test_graph.fsg";
  write_graph(path, a);
  CHECK(read_graph(path) == a);
}

TEST_CASE("symmetrized view") {
  auto g = testgraphs::from_edges(3, {{1, 0, -2.0, {}}, {2, 1, 0.5, {}}});
  SymmetrizedView v(g);
  CHECK(v.total_abs() == doctest::Approx(2.0 * g.total_abs_weight()));
  CHECK(v.degree(1) == 2);
  for (std::int64_t i = 0; i < 3; ++i)
    for (auto j : v.neighbors(i)) CHECK(j != i);
  auto dense = oracle::dense_symmetric(g);
  for (std::int64_t i = 0; i < 3; ++i) {
    auto cols = v.neighbors(i);
    auto ws = v.neighbor_weights(i);
    for (std::size_t k = 0; k < cols.size(); ++k) CHECK(ws[k] == dense[i][cols[k]]);
  }
}

TEST_CASE("triplet validation") {
  CHECK_THROWS_AS(SignedSparseGraph::from_triplets(2, {{1, 1, 1.0, {}}}), ValidationError);
  CHECK_THROWS_AS(SignedSparseGraph::from_triplets(2, {{1, 0, 0.0, {}}}), ValidationError);
  CHECK_THROWS_AS(SignedSparseGraph::from_triplets(2, {{1, 0, 1.0, {}}, {1, 0, 2.0, {}}}), ValidationError);
  CHECK_THROWS_AS(SignedSparseGraph::from_triplets(2, {{2, 0, 1.0, {}}}), ValidationError);
}
