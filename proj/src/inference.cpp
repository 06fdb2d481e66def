#include "frustra/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "frustra/error.hpp"
#include "frustra/random.hpp"
#include "frustra/synthetic.hpp"

namespace frustra {

namespace {

std::vector<double> to_double(const Blob& blob) { return {blob.values.begin(), blob.values.end()}; }

struct Window {
  std::int64_t oh_n, ow_n;
};

Window window_extent(const LayerSpec& l, const TensorShape& in) {
  const auto& p = l.params;
  return {window_output_extent(in.height(), p.padding.top, p.padding.bottom, p.kernel.h, p.stride.h),
          window_output_extent(in.width(), p.padding.left, p.padding.right, p.kernel.w, p.stride.w)};
}

std::vector<double> conv(const LayerSpec& l, const std::vector<double>& w, const std::vector<double>& b,
                         const TensorShape& in_s, const std::vector<double>& in) {
  const auto& p = l.params;
  const auto [oh_n, ow_n] = window_extent(l, in_s);
  const auto C = in_s.channels();
  const auto W = in_s.width();
  const auto F = p.filters;
  const auto cin_g = C / p.groups;
  const auto f_g = F / p.groups;
  std::vector<double> out(static_cast<std::size_t>(oh_n * ow_n * F));
  for (std::int64_t oh = 0; oh < oh_n; ++oh) {
    for (std::int64_t ow = 0; ow < ow_n; ++ow) {
      for (std::int64_t f = 0; f < F; ++f) {
        const auto grp = f / f_g;
        double acc = b.empty() ? 0.0 : b[f];
        for (std::int64_t kh = 0; kh < p.kernel.h; ++kh) {
          const auto ih = oh * p.stride.h - p.padding.top + kh;
          if (ih < 0 || ih >= in_s.height()) continue;
          for (std::int64_t kw = 0; kw < p.kernel.w; ++kw) {
            const auto iw = ow * p.stride.w - p.padding.left + kw;
            if (iw < 0 || iw >= W) continue;
            const auto* src = &in[(ih * W + iw) * C + grp * cin_g];
            const auto* ker = &w[((kh * p.kernel.w + kw) * cin_g) * F + f];
            for (std::int64_t ci = 0; ci < cin_g; ++ci) acc += ker[ci * F] * src[ci];
          }
        }
        const auto out_c = (p.shuffle && p.groups > 1) ? shuffled_channel(f, F, p.groups) : f;
        out[(oh * ow_n + ow) * F + out_c] = acc;
      }
    }
  }
  return out;
}

std::vector<double> dense(const LayerSpec& l, const std::vector<double>& w, const std::vector<double>& b,
                          const std::vector<double>& in) {
  const auto n = static_cast<std::int64_t>(in.size());
  std::vector<double> out(static_cast<std::size_t>(l.params.units));
  for (std::int64_t o = 0; o < l.params.units; ++o) {
    double acc = b.empty() ? 0.0 : b[o];
    const auto* row = &w[o * n];
    for (std::int64_t i = 0; i < n; ++i) acc += row[i] * in[i];
    out[o] = acc;
  }
  return out;
}

// Padded positions are ignored: they neither win a max nor count in a mean.
std::vector<double> pool(const LayerSpec& l, const TensorShape& in_s, const std::vector<double>& in) {
  const auto& p = l.params;
  const auto [oh_n, ow_n] = window_extent(l, in_s);
  const auto C = in_s.channels();
  const auto W = in_s.width();
  const bool is_max = l.kind == LayerKind::max_pool;
  std::vector<double> out(static_cast<std::size_t>(oh_n * ow_n * C));
  for (std::int64_t oh = 0; oh < oh_n; ++oh) {
    for (std::int64_t ow = 0; ow < ow_n; ++ow) {
      for (std::int64_t c = 0; c < C; ++c) {
        double acc = is_max ? -std::numeric_limits<double>::infinity() : 0.0;
        std::int64_t count = 0;
        for (std::int64_t kh = 0; kh < p.kernel.h; ++kh) {
          const auto ih = oh * p.stride.h - p.padding.top + kh;
          if (ih < 0 || ih >= in_s.height()) continue;
          for (std::int64_t kw = 0; kw < p.kernel.w; ++kw) {
            const auto iw = ow * p.stride.w - p.padding.left + kw;
            if (iw < 0 || iw >= W) continue;
            const double v = in[(ih * W + iw) * C + c];
            acc = is_max ? std::max(acc, v) : acc + v;
            ++count;
          }
        }
        out[(oh * ow_n + ow) * C + c] = is_max ? acc : acc / static_cast<double>(count);
      }
    }
  }
  return out;
}

std::vector<double> batch_norm(const LayerSpec& l, const std::vector<double>& w, const TensorShape& s,
                               const std::vector<double>& in) {
  const auto C = s.channels();
  std::vector<double> out(in.size());
  for (std::size_t e = 0; e < in.size(); ++e) {
    const auto c = static_cast<std::int64_t>(e) % C;
    const double gamma = w[c], beta = w[C + c], mean = w[2 * C + c], var = w[3 * C + c];
    out[e] = gamma * (in[e] - mean) / std::sqrt(var + l.params.bn_epsilon) + beta;
  }
  return out;
}

// b_c = a_c / (k + alpha/size * sum_{|c'-c| <= size/2} a_c'^2)^beta
std::vector<double> lrn(const LayerSpec& l, const TensorShape& s, const std::vector<double>& in) {
  const auto& p = l.params;
  const auto C = s.channels();
  const auto half = p.lrn_size / 2;
  std::vector<double> out(in.size());
  for (std::size_t base = 0; base < in.size(); base += static_cast<std::size_t>(C)) {
    for (std::int64_t c = 0; c < C; ++c) {
      double sq = 0.0;
      for (auto k = std::max<std::int64_t>(0, c - half); k <= std::min(C - 1, c + half); ++k) {
        sq += in[base + k] * in[base + k];
      }
      out[base + c] = in[base + c] / std::pow(p.lrn_k + p.lrn_alpha / static_cast<double>(p.lrn_size) * sq, p.lrn_beta);
    }
  }
  return out;
}

std::vector<double> softmax(const std::vector<double>& in) {
  const double m = *std::max_element(in.begin(), in.end());
  std::vector<double> out(in.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i) sum += (out[i] = std::exp(in[i] - m));
  for (auto& v : out) v /= sum;
  return out;
}

std::int64_t row_find(const SignedSparseGraph& g, std::int64_t row, std::int64_t col, double& weight) {
  const auto cols = g.row_cols(row);
  const auto it = std::lower_bound(cols.begin(), cols.end(), col);
  if (it == cols.end() || *it != col) return -1;
  const auto k = it - cols.begin();
  weight = g.row_weights(row)[k];
  return g.row_ptr()[row] + k;
}

double row_max_state(const SignedSparseGraph& g, const ActivationTrace& t, std::int64_t row) {
  double m = -std::numeric_limits<double>::infinity();
  for (auto c : g.row_cols(row)) m = std::max(m, t.state[c]);
  return m;
}

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

Network::Network(const NetworkManifest& manifest, const WeightStore& store)
    : manifest_(&manifest), store_(&store), layout_(compute_layout(manifest)) {
  const auto count = manifest.layer_count();
  weights_.resize(count);
  biases_.resize(count);
  chain_.resize(count);
  state_layer_.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& l = manifest.layer(i);
    if (l.weight_ref) weights_[i] = to_double(store.get(*l.weight_ref));
    if (l.bias_ref) biases_[i] = to_double(store.get(*l.bias_ref));
    state_layer_[i] = i;
    if (!owns_nodes(l.kind)) continue;
    auto cur = i;
    while (true) {
      const auto consumers = manifest.consumers_of(cur);
      auto next = std::find_if(consumers.begin(), consumers.end(),
                               [&](std::size_t c) { return is_activation(manifest.layer(c).kind); });
      if (next == consumers.end() || manifest.layer(*next).kind == LayerKind::softmax) break;
      cur = *next;
      chain_[i].push_back(cur);
    }
    state_layer_[i] = cur;
  }
}

std::vector<double> Network::apply(std::size_t i, const std::vector<const std::vector<double>*>& in) const {
  const auto& m = *manifest_;
  const auto& l = m.layer(i);
  const auto src = m.inputs_of(i);
  switch (l.kind) {
    case LayerKind::conv:
    case LayerKind::grouped_conv:
      return conv(l, weights_[i], biases_[i], m.shape(src[0]), *in[0]);
    case LayerKind::dense:
      return dense(l, weights_[i], biases_[i], *in[0]);
    case LayerKind::max_pool:
    case LayerKind::avg_pool:
      return pool(l, m.shape(src[0]), *in[0]);
    case LayerKind::relu: {
      std::vector<double> out(*in[0]);
      for (auto& v : out) v = std::max(v, 0.0);
      return out;
    }
    case LayerKind::batch_norm:
      return batch_norm(l, weights_[i], m.shape(i), *in[0]);
    case LayerKind::lrn:
      return lrn(l, m.shape(i), *in[0]);
    case LayerKind::softmax:
      return softmax(*in[0]);
    case LayerKind::dropout:
      return *in[0];
    case LayerKind::add: {
      std::vector<double> out(*in[0]);
      for (std::size_t k = 1; k < in.size(); ++k) {
        for (std::size_t e = 0; e < out.size(); ++e) out[e] += (*in[k])[e];
      }
      return out;
    }
    case LayerKind::concat: {
      const auto& out_s = m.shape(i);
      std::vector<double> out;
      out.reserve(static_cast<std::size_t>(out_s.size()));
      if (!out_s.is_image()) {
        for (const auto* t : in) out.insert(out.end(), t->begin(), t->end());
        return out;
      }
      const auto pixels = out_s.height() * out_s.width();
      for (std::int64_t px = 0; px < pixels; ++px) {
        for (std::size_t k = 0; k < in.size(); ++k) {
          const auto c = m.shape(src[k]).channels();
          out.insert(out.end(), in[k]->begin() + px * c, in[k]->begin() + (px + 1) * c);
        }
      }
      return out;
    }
    case LayerKind::input:
      break;
  }
  throw ValidationError("layer '" + l.id + "' cannot be applied");
}

ActivationTrace Network::forward(std::span<const double> x) const {
  const auto& m = *manifest_;
  if (static_cast<std::int64_t>(x.size()) != input_size()) {
    throw ValidationError("input has " + std::to_string(x.size()) + " elements, model expects " +
                          std::to_string(input_size()));
  }
  ActivationTrace t;
  t.layer_outputs.resize(m.layer_count());
  for (std::size_t i = 0; i < m.layer_count(); ++i) {
    if (m.layer(i).kind == LayerKind::input) {
      t.layer_outputs[i].assign(x.begin(), x.end());
    } else {
      std::vector<const std::vector<double>*> in;
      for (auto s : m.inputs_of(i)) in.push_back(&t.layer_outputs[s]);
      t.layer_outputs[i] = apply(i, in);
    }
    for (auto v : t.layer_outputs[i]) {
      if (!std::isfinite(v)) throw NumericalError("layer '" + m.layer(i).id + "': non-finite value");
    }
  }

  const auto n = static_cast<std::size_t>(layout_.node_count);
  t.preactivation.resize(n);
  t.state.resize(n);
  t.active.assign(n, 1);
  for (std::size_t i = 0; i < m.layer_count(); ++i) {
    const auto b = layout_.block_of_layer[i];
    if (b < 0) continue;
    const auto begin = static_cast<std::size_t>(layout_.blocks[b].begin);
    const auto& q = t.layer_outputs[i];
    const auto& z = t.layer_outputs[state_layer_[i]];
    std::copy(q.begin(), q.end(), t.preactivation.begin() + begin);
    std::copy(z.begin(), z.end(), t.state.begin() + begin);
    for (auto c : chain_[i]) {
      if (m.layer(c).kind != LayerKind::relu) continue;
      const auto& relu_in = t.layer_outputs[m.inputs_of(c)[0]];
      for (std::size_t e = 0; e < relu_in.size(); ++e) {
        if (!(relu_in[e] > 0.0)) t.active[begin + e] = 0;
      }
    }
  }
  const auto& out = layout_.outputs();
  t.logits.assign(t.state.begin() + out.begin, t.state.begin() + out.end());
  const auto best = std::max_element(t.logits.begin(), t.logits.end());
  t.predicted_class = best - t.logits.begin();
  t.predicted_tie = std::count(t.logits.begin(), t.logits.end(), *best) > 1;
  return t;
}

std::vector<double> Network::logits(std::span<const double> x) const { return forward(x).logits; }

std::vector<double> Network::eval_block(std::size_t layer, const std::vector<std::vector<double>>& inputs) const {
  std::vector<const std::vector<double>*> in;
  for (const auto& t : inputs) in.push_back(&t);
  auto v = apply(layer, in);
  for (auto c : chain_[layer]) v = apply(c, {&v});
  return v;
}

ActivationTrace forward(const NetworkManifest& manifest, const WeightStore& store, std::span<const double> x) {
  return Network(manifest, store).forward(x);
}

ActiveSubgraph extract_active(const SignedSparseGraph& graph, const NodeLayout& layout, const ActivationTrace& trace) {
  const auto n = graph.node_count();
  if (layout.node_count != n || static_cast<std::int64_t>(trace.state.size()) != n) {
    throw ValidationError("graph, layout and activation trace describe different networks");
  }
  if (!graph.is_lower_triangular()) throw ValidationError("graph is not in topological node order");

  std::vector<std::uint8_t> alive(trace.active);
  const auto& out = layout.outputs();
  const auto output = out.begin + trace.predicted_class;
  for (auto i = out.begin; i < out.end(); ++i) alive[i] = i == output;

  const auto rows = graph.row_ptr();
  const auto cols = graph.cols();
  std::vector<std::uint8_t> keep_edge(cols.size(), 0);
  std::vector<std::uint8_t> max_pool_row(static_cast<std::size_t>(n), 0);
  for (const auto& b : layout.blocks) {
    if (b.kind == LayerKind::max_pool) std::fill_n(max_pool_row.begin() + b.begin, b.count, 1);
  }
  for (std::int64_t r = 0; r < n; ++r) {
    if (!alive[r]) continue;
    const double top = max_pool_row[r] ? row_max_state(graph, trace, r) : 0.0;
    for (auto e = rows[r]; e < rows[r + 1]; ++e) {
      const auto c = cols[e];
      keep_edge[e] = alive[c] && (!max_pool_row[r] || trace.state[c] == top);
    }
  }

  std::vector<std::uint8_t> from_input(static_cast<std::size_t>(n), 0);
  const auto& in = layout.inputs();
  for (auto i = in.begin; i < in.end(); ++i) from_input[i] = alive[i];
  for (std::int64_t r = 0; r < n; ++r) {
    for (auto e = rows[r]; e < rows[r + 1] && !from_input[r]; ++e) {
      if (keep_edge[e] && from_input[cols[e]]) from_input[r] = 1;
    }
  }
  std::vector<std::uint8_t> to_output(static_cast<std::size_t>(n), 0);
  to_output[output] = from_input[output];
  for (auto r = n - 1; r >= 0; --r) {
    if (!to_output[r]) continue;
    for (auto e = rows[r]; e < rows[r + 1]; ++e) {
      if (keep_edge[e] && from_input[cols[e]]) to_output[cols[e]] = 1;
    }
  }

  ActiveSubgraph result;
  std::vector<std::int64_t> compact(static_cast<std::size_t>(n), -1);
  for (std::int64_t i = 0; i < n; ++i) {
    if (to_output[i]) {
      compact[i] = static_cast<std::int64_t>(result.original_nodes.size());
      result.original_nodes.push_back(i);
    }
  }
  std::vector<Triplet> triplets;
  for (std::int64_t r = 0; r < n; ++r) {
    if (compact[r] < 0) continue;
    for (auto e = rows[r]; e < rows[r + 1]; ++e) {
      if (keep_edge[e] && compact[cols[e]] >= 0) {
        triplets.push_back(Triplet{compact[r], compact[cols[e]], graph.weights()[e], graph.provenance()[e]});
      }
    }
  }
  std::vector<LayerBlock> blocks(graph.layers().begin(), graph.layers().end());
  for (auto& b : blocks) {
    const auto lo = std::lower_bound(result.original_nodes.begin(), result.original_nodes.end(), b.begin);
    const auto hi = std::lower_bound(result.original_nodes.begin(), result.original_nodes.end(), b.end());
    b.begin = lo - result.original_nodes.begin();
    b.count = hi - lo;
  }
  const auto kept = static_cast<std::int64_t>(result.original_nodes.size());
  result.graph = SignedSparseGraph::from_triplets(kept, std::move(triplets), std::move(blocks));
  if (to_output[output]) {
    result.output_original = output;
    result.output_node = compact[output];
  }
  return result;
}

bool is_kink_free(const Network& net, const SignedSparseGraph& graph, const ActivationTrace& trace, double margin) {
  const auto& m = net.manifest();
  for (std::size_t i = 0; i < m.layer_count(); ++i) {
    if (m.layer(i).kind != LayerKind::relu) continue;
    for (auto v : trace.layer_outputs[m.inputs_of(i)[0]]) {
      if (std::abs(v) < margin) return false;
    }
  }
  for (const auto& b : net.layout().blocks) {
    if (b.kind != LayerKind::max_pool) continue;
    for (auto r = b.begin; r < b.end(); ++r) {
      // exact ties are fine (every tied argmax keeps its edge); near-ties are not
      const double top = row_max_state(graph, trace, r);
      for (auto c : graph.row_cols(r)) {
        const double gap = top - trace.state[c];
        if (gap > 0.0 && gap < margin) return false;
      }
    }
  }
  return true;
}

JacobianReport jacobian_sign_check(const Network& net, const SignedSparseGraph& graph, std::vector<double> x,
                                   const JacobianOptions& opt) {
  const auto& m = net.manifest();
  const auto& layout = net.layout();
  if (graph.node_count() != layout.node_count) throw ValidationError("graph does not match the model");
  if (!(opt.step > 0.0) || !(opt.tolerance >= 0.0)) throw ValidationError("step must be > 0, tolerance >= 0");

  JacobianReport report;
  ActivationTrace trace;
  bool found = false;
  for (std::int64_t attempt = 0; attempt < opt.max_attempts && !found; ++attempt) {
    if (attempt > 0 || x.empty()) x = random_input(m.input_shape(), derive_seed(opt.seed, static_cast<std::uint64_t>(attempt)));
    trace = net.forward(x);
    report.attempts = attempt + 1;
    found = is_kink_free(net, graph, trace, opt.kink_margin);
  }
  if (!found) {
    throw NumericalError("no kink-free input found in " + std::to_string(opt.max_attempts) + " attempts");
  }
  report.input = x;

  auto rng = make_rng(derive_seed(opt.seed, "sources"));
  const double h = opt.step;
  for (std::size_t L = 0; L < m.layer_count(); ++L) {
    const auto bi = layout.block_of_layer[L];
    if (bi < 0 || m.layer(L).kind == LayerKind::input) continue;
    const auto& block = layout.blocks[bi];
    const bool max_pool = block.kind == LayerKind::max_pool;

    std::vector<std::vector<double>> inputs;
    std::vector<std::tuple<std::int64_t, std::size_t, std::size_t>> occurrences;  // node, tensor, element
    for (auto s : m.inputs_of(L)) {
      inputs.push_back(trace.layer_outputs[s]);
      const auto& nodes = layout.element_nodes[s];
      for (std::size_t e = 0; e < nodes.size(); ++e) occurrences.emplace_back(nodes[e], inputs.size() - 1, e);
    }
    std::sort(occurrences.begin(), occurrences.end());
    std::vector<std::int64_t> sources;
    for (const auto& [node, t, e] : occurrences) {
      if (sources.empty() || sources.back() != node) sources.push_back(node);
    }
    if (opt.max_sources_per_layer > 0 && static_cast<std::int64_t>(sources.size()) > opt.max_sources_per_layer) {
      shuffle(sources.begin(), sources.end(), rng);
      sources.resize(static_cast<std::size_t>(opt.max_sources_per_layer));
      std::sort(sources.begin(), sources.end());
    }
    std::vector<double> top;
    if (max_pool) {
      for (auto r = block.begin; r < block.end(); ++r) top.push_back(row_max_state(graph, trace, r));
    }

    for (auto j : sources) {
      auto range = std::equal_range(occurrences.begin(), occurrences.end(), std::make_tuple(j, std::size_t{0}, std::size_t{0}),
                                    [](const auto& a, const auto& b) { return std::get<0>(a) < std::get<0>(b); });
      const double saved = inputs[std::get<1>(*range.first)][std::get<2>(*range.first)];
      auto set = [&](double v) {
        for (auto it = range.first; it != range.second; ++it) inputs[std::get<1>(*it)][std::get<2>(*it)] = v;
      };
      set(saved + h);
      const auto plus = net.eval_block(L, inputs);
      set(saved - h);
      const auto minus = net.eval_block(L, inputs);
      set(saved);

      for (std::int64_t r = 0; r < block.count; ++r) {
        const auto i = block.begin + r;
        const double d = (plus[r] - minus[r]) / (2.0 * h);
        double a = 0.0;
        row_find(graph, i, j, a);
        int expected = trace.active[i] ? sign_of(a) : 0;
        if (max_pool && a != 0.0 && trace.state[j] != top[r]) expected = 0;
        const int observed = std::abs(d) <= opt.tolerance ? 0 : sign_of(d);
        ++report.entries;
        if (expected != 0) ++report.nonzero_expected;
        if (expected == observed) {
          ++report.agreements;
        } else {
          ++report.violation_count;
          if (report.violations.size() < opt.max_reported) {
            report.violations.push_back(SignViolation{m.layer(L).id, i, j, expected, d});
          }
        }
      }
    }
  }
  return report;
}

}  // namespace frustra
