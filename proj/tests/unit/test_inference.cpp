#include <doctest.h>

#include <cmath>
#include <queue>

#include "builders.hpp"
#include "frustra/error.hpp"
#include "frustra/graph_builder.hpp"
#include "frustra/inference.hpp"
#include "frustra/synthetic.hpp"

using namespace frustra;

namespace {

Model identity_relu() {
  WeightStore store;
  store.put("fc.w", build::blob({2, 2}, {1, 0, 0, 1}));
  store.put("fc.b", build::blob({2}, {0, 0}));
  return build::model(TensorShape{2},
                      {build::layer("in", LayerKind::input), build::dense("fc", "in", 2),
                       build::layer("act", LayerKind::relu, {"fc"}), build::layer("sm", LayerKind::softmax, {"act"})},
                      store);
}

}  // namespace

TEST_CASE("relu and softmax") {
  auto m = identity_relu();
  Network net(m.manifest, m.store);
  auto t = net.forward(std::vector<double>{-1.0, 2.0});
  CHECK(t.state[2] == 0.0);
  CHECK(t.state[3] == 2.0);
  CHECK(t.active[2] == 0);
  CHECK(t.active[3] == 1);
  CHECK(t.predicted_class == 1);

  auto z = net.forward(std::vector<double>{-1.0, -3.0});
  const auto& sm = z.layer_outputs[m.manifest.index_of("sm")];
  CHECK(sm[0] == doctest::Approx(0.5));
  CHECK(sm[1] == doctest::Approx(0.5));
  CHECK(z.predicted_tie);
  CHECK(z.predicted_class == 0);
}

TEST_CASE("input validation") {
  auto m = identity_relu();
  Network net(m.manifest, m.store);
  CHECK_THROWS_AS(net.forward(std::vector<double>{1.0}), ValidationError);
  CHECK_THROWS_AS(net.forward(std::vector<double>{1.0, NAN}), NumericalError);
}

TEST_CASE("owning layers compute A z + b") {
  auto m = generate_synthetic(4, SyntheticTemplate::tiny_cnn);
  auto g = assemble(m.manifest, m.store);
  auto layout = compute_layout(m.manifest);
  Network net(m.manifest, m.store);
  auto x = random_input(m.manifest.input_shape(), 17);
  auto t = net.forward(x);
  for (const char* id : {"conv1", "conv2", "fc"}) {
    const auto li = m.manifest.find(id);
    REQUIRE(li.has_value());
    const auto& l = m.manifest.layer(*li);
    const auto& blk = layout.blocks[static_cast<std::size_t>(layout.block_of_layer[*li])];
    const auto channels = l.kind == LayerKind::dense ? l.params.units : l.params.filters;
    const auto* bias = l.bias_ref ? &m.store.get(*l.bias_ref).values : nullptr;
    for (auto r = blk.begin; r < blk.end(); ++r) {
      double q = bias ? (*bias)[static_cast<std::size_t>((r - blk.begin) % channels)] : 0.0;
      const auto cols = g.row_cols(r);
      const auto ws = g.row_weights(r);
      for (std::size_t k = 0; k < cols.size(); ++k) q += ws[k] * t.state[cols[k]];
      REQUIRE(t.preactivation[r] == doctest::Approx(q).epsilon(1e-5).scale(1.0));
    }
  }
}

TEST_CASE("max pool keeps the single argmax edge") {
  WeightStore store;
  auto m = build::model(TensorShape{1, 2, 1},
                        {build::layer("in", LayerKind::input), build::pool("mp", LayerKind::max_pool, "in", 1, 2)},
                        store);
  auto g = assemble(m.manifest, m.store);
  auto layout = compute_layout(m.manifest);
  auto t = forward(m.manifest, m.store, std::vector<double>{3.0, 5.0});
  CHECK(t.state[2] == 5.0);
  auto a = extract_active(g, layout, t);
  CHECK(a.graph.node_count() == 2);
  CHECK(a.graph.edge_count() == 1);
  CHECK(a.original_nodes == std::vector<std::int64_t>{1, 2});
  CHECK(a.output_original == 2);
}

TEST_CASE("all-positive network keeps everything but the other outputs") {
  auto m = generate_synthetic(2, SyntheticTemplate::tiny_mlp);
  WeightStore store = m.store;
  for (const auto& [id, blob] : m.store.blobs()) {
    auto& v = store.get_mutable(id).values;
    for (auto& w : v) w = std::abs(w) + 0.01f;
  }
  auto g = assemble(m.manifest, store);
  auto layout = compute_layout(m.manifest);
  auto t = forward(m.manifest, store, random_input(m.manifest.input_shape(), 1, 0.1, 1.0));
  auto a = extract_active(g, layout, t);
  const auto& out = layout.outputs();
  CHECK(a.graph.node_count() == g.node_count() - (out.count - 1));
  std::int64_t dropped = 0;
  for (auto r = out.begin; r < out.end(); ++r)
    if (r != a.output_original) dropped += static_cast<std::int64_t>(g.row_cols(r).size());
  CHECK(a.graph.edge_count() == g.edge_count() - dropped);
}

TEST_CASE("every active node lies on an input-output path") {
  auto m = generate_synthetic(1, SyntheticTemplate::tiny_cnn);
  auto g = assemble(m.manifest, m.store);
  auto layout = compute_layout(m.manifest);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto t = forward(m.manifest, m.store, random_input(m.manifest.input_shape(), seed));
    auto a = extract_active(g, layout, t);
    const auto& ag = a.graph;
    const auto n = ag.node_count();
    REQUIRE(n > 0);
    std::vector<std::vector<std::int64_t>> succ(static_cast<std::size_t>(n)), pred(static_cast<std::size_t>(n));
    const auto rows = ag.edge_rows();
    for (std::int64_t e = 0; e < ag.edge_count(); ++e) {
      succ[ag.cols()[e]].push_back(rows[e]);
      pred[rows[e]].push_back(ag.cols()[e]);
    }
    auto bfs = [&](std::vector<std::int64_t> start, const std::vector<std::vector<std::int64_t>>& adj) {
      std::vector<char> seen(static_cast<std::size_t>(n), 0);
      std::queue<std::int64_t> q;
      for (auto s : start) {
        seen[s] = 1;
        q.push(s);
      }
      while (!q.empty()) {
        auto u = q.front();
        q.pop();
        for (auto v : adj[u])
          if (!seen[v]) {
            seen[v] = 1;
            q.push(v);
          }
      }
      return seen;
    };
    std::vector<std::int64_t> inputs;
    for (std::int64_t i = 0; i < n; ++i)
      if (a.original_nodes[i] < layout.inputs().end()) inputs.push_back(i);
    auto fwd = bfs(inputs, succ);
    auto bwd = bfs({a.output_node}, pred);
    for (std::int64_t i = 0; i < n; ++i) {
      REQUIRE(fwd[i]);
      REQUIRE(bwd[i]);
      const auto orig = a.original_nodes[i];
      if (orig >= layout.inputs().end()) REQUIRE(t.active[orig] == 1);
    }
  }
}

TEST_CASE("linear network Jacobian signs equal A") {
  WeightStore store;
  store.put("a.w", build::blob({4, 3}, {0.5f, -1, 2, -0.3f, 0.7f, 1, -2, 0.1f, 0.4f, 1.5f, -0.6f, -0.9f}));
  store.put("b.w", build::blob({2, 4}, {1, -1, 0.5f, -0.25f, -0.8f, 0.2f, 0.9f, 1.1f}));
  auto m = build::model(TensorShape{3},
                        {build::layer("in", LayerKind::input), build::dense("a", "in", 4, false),
                         build::dense("b", "a", 2, false)},
                        store);
  auto g = assemble(m.manifest, m.store);
  Network net(m.manifest, m.store);
  JacobianOptions opt;
  auto r = jacobian_sign_check(net, g, {}, opt);
  CHECK(r.passed());
  CHECK(r.nonzero_expected == 20);
  CHECK(r.agreement_fraction() == 1.0);
}

TEST_CASE("relu network Jacobian zeroes inactive rows") {
  auto m = generate_synthetic(3, SyntheticTemplate::tiny_mlp);
  auto g = assemble(m.manifest, m.store);
  Network net(m.manifest, m.store);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    JacobianOptions opt;
    opt.seed = seed;
    auto r = jacobian_sign_check(net, g, {}, opt);
    CHECK(r.passed());
    auto t = net.forward(r.input);
    std::int64_t active_entries = 0;
    const auto rows = g.edge_rows();
    for (std::int64_t e = 0; e < g.edge_count(); ++e) active_entries += t.active[rows[e]];
    CHECK(r.nonzero_expected == active_entries);
  }
}

TEST_CASE("gauged network has S F S >= 0") {
  auto m = generate_synthetic(1, SyntheticTemplate::residual_cnn);
  auto gauged = make_gauged_positive(m, 3);
  auto g = assemble(m.manifest, gauged.store);
  const auto rows = g.edge_rows();
  for (std::int64_t e = 0; e < g.edge_count(); ++e)
    REQUIRE(gauged.node_signs[rows[e]] * gauged.node_signs[g.cols()[e]] * g.weights()[e] > 0.0);
  Network net(m.manifest, gauged.store);
  JacobianOptions opt;
  opt.max_sources_per_layer = 16;
  CHECK(jacobian_sign_check(net, g, {}, opt).passed());
}
