#include "frustra/synthetic.hpp"

#include <cmath>
#include <map>
#include <numeric>

#include "frustra/error.hpp"
#include "frustra/graph_builder.hpp"
#include "frustra/random.hpp"

namespace frustra {

SyntheticTemplate parse_template(std::string_view name) {
  if (name == "tiny_mlp") return SyntheticTemplate::tiny_mlp;
  if (name == "tiny_cnn") return SyntheticTemplate::tiny_cnn;
  if (name == "residual_cnn") return SyntheticTemplate::residual_cnn;
  if (name == "grouped_cnn") return SyntheticTemplate::grouped_cnn;
  throw ValidationError("unknown synthetic template '" + std::string(name) + "'");
}

std::string_view to_string(SyntheticTemplate t) {
  switch (t) {
    case SyntheticTemplate::tiny_mlp: return "tiny_mlp";
    case SyntheticTemplate::tiny_cnn: return "tiny_cnn";
    case SyntheticTemplate::residual_cnn: return "residual_cnn";
    case SyntheticTemplate::grouped_cnn: return "grouped_cnn";
  }
  return "unknown";
}

namespace {

class NetBuilder {
 public:
  NetBuilder(std::uint64_t seed, TensorShape input) : rng_(make_rng(seed)), input_(std::move(input)) {
    add(LayerSpec{"input", LayerKind::input, {}, {}, {}, {}}, input_);
  }

  std::string conv(const std::string& id, const std::string& in, std::int64_t filters,
                   std::int64_t k, std::int64_t pad, std::int64_t groups = 1, bool shuffle = false) {
    const auto& s = shapes_.at(in);
    LayerSpec l{id, groups > 1 ? LayerKind::grouped_conv : LayerKind::conv, {in}, {}, {}, {}};
    l.params.kernel = {k, k};
    l.params.padding = {pad, pad, pad, pad};
    l.params.filters = filters;
    l.params.groups = groups;
    l.params.shuffle = shuffle;
    const auto cin_g = s.channels() / groups;
    weights(l, {k, k, cin_g, filters}, k * k * cin_g, filters);
    const auto oh = window_output_extent(s.height(), pad, pad, k, 1);
    const auto ow = window_output_extent(s.width(), pad, pad, k, 1);
    return add(std::move(l), TensorShape{oh, ow, filters});
  }

  std::string dense(const std::string& id, const std::string& in, std::int64_t units) {
    const auto n_in = shapes_.at(in).size();
    LayerSpec l{id, LayerKind::dense, {in}, {}, {}, {}};
    l.params.units = units;
    weights(l, {units, n_in}, n_in, units);
    return add(std::move(l), TensorShape{units});
  }

  std::string pool(const std::string& id, LayerKind kind, const std::string& in, std::int64_t p) {
    const auto& s = shapes_.at(in);
    LayerSpec l{id, kind, {in}, {}, {}, {}};
    l.params.kernel = {p, p};
    l.params.stride = {p, p};
    const auto oh = window_output_extent(s.height(), 0, 0, p, p);
    const auto ow = window_output_extent(s.width(), 0, 0, p, p);
    return add(std::move(l), TensorShape{oh, ow, s.channels()});
  }

  std::string activation(const std::string& id, LayerKind kind, const std::string& in) {
    LayerSpec l{id, kind, {in}, {}, {}, {}};
    if (kind == LayerKind::batch_norm) {
      const auto c = shapes_.at(in).channels();
      Blob b{{4, c}, std::vector<float>(static_cast<std::size_t>(4 * c))};
      for (std::int64_t i = 0; i < c; ++i) {
        b.values[i] = static_cast<float>(uniform(rng_, 0.5, 1.5));              // gamma
        b.values[c + i] = static_cast<float>(uniform(rng_, -0.1, 0.1));         // beta
        b.values[2 * c + i] = static_cast<float>(uniform(rng_, -0.1, 0.1));     // mean
        b.values[3 * c + i] = static_cast<float>(uniform(rng_, 0.5, 1.5));      // variance
      }
      store_.put(id + ".bn", std::move(b));
      l.weight_ref = id + ".bn";
    }
    return add(std::move(l), shapes_.at(in));
  }

  std::string join(const std::string& id, LayerKind kind, std::vector<std::string> ins) {
    TensorShape s = shapes_.at(ins[0]);
    if (kind == LayerKind::concat) {
      std::int64_t c = 0;
      for (const auto& i : ins) c += shapes_.at(i).channels();
      s = TensorShape{s.height(), s.width(), c};
    }
    return add(LayerSpec{id, kind, std::move(ins), {}, {}, {}}, s);
  }

  Model finish() {
    NetworkManifest m(input_, std::move(layers_), store_);
    return Model{std::move(m), std::move(store_)};
  }

 private:
  void weights(LayerSpec& l, std::vector<std::int64_t> shape, std::int64_t fan_in, std::int64_t units) {
    const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Blob w{std::move(shape), {}};
    w.values.resize(static_cast<std::size_t>(w.declared_size()));
    for (auto& v : w.values) v = static_cast<float>(uniform(rng_, -a, a));
    Blob b{{units}, std::vector<float>(static_cast<std::size_t>(units))};
    for (auto& v : b.values) v = static_cast<float>(uniform(rng_, -0.1, 0.1));
    store_.put(l.id + ".w", std::move(w));
    store_.put(l.id + ".b", std::move(b));
    l.weight_ref = l.id + ".w";
    l.bias_ref = l.id + ".b";
  }

  std::string add(LayerSpec l, TensorShape s) {
    auto id = l.id;
    shapes_.insert_or_assign(id, std::move(s));
    layers_.push_back(std::move(l));
    return id;
  }

  Rng rng_;
  TensorShape input_;
  std::vector<LayerSpec> layers_;
  WeightStore store_;
  std::map<std::string, TensorShape> shapes_;
};

}  // namespace

Model generate_synthetic(std::uint64_t seed, SyntheticTemplate which) {
  using K = LayerKind;
  switch (which) {
    case SyntheticTemplate::tiny_mlp: {
      NetBuilder b(seed, TensorShape{4});
      auto h = b.activation("relu1", K::relu, b.dense("fc1", "input", 6));
      h = b.activation("relu2", K::relu, b.dense("fc2", h, 5));
      b.activation("softmax", K::softmax, b.dense("fc3", h, 3));
      return b.finish();
    }
    case SyntheticTemplate::tiny_cnn: {
      NetBuilder b(seed, TensorShape{12, 12, 3});
      auto h = b.conv("conv1", "input", 6, 3, 1);
      h = b.activation("bn1", K::batch_norm, h);
      h = b.activation("relu1", K::relu, h);
      h = b.pool("pool1", K::max_pool, h, 2);
      h = b.activation("relu2", K::relu, b.conv("conv2", h, 8, 3, 0));
      h = b.pool("pool2", K::avg_pool, h, 2);
      b.activation("softmax", K::softmax, b.dense("fc", h, 1000));
      return b.finish();
    }
    case SyntheticTemplate::residual_cnn: {
      NetBuilder b(seed, TensorShape{8, 8, 3});
      auto skip = b.activation("relu1", K::relu, b.conv("conv1", "input", 4, 3, 1));
      auto h = b.conv("conv2", skip, 4, 3, 1);
      h = b.activation("relu2", K::relu, b.join("add1", K::add, {h, skip}));
      h = b.pool("pool1", K::max_pool, h, 2);
      b.activation("softmax", K::softmax, b.dense("fc", h, 10));
      return b.finish();
    }
    case SyntheticTemplate::grouped_cnn: {
      NetBuilder b(seed, TensorShape{8, 8, 4});
      auto h1 = b.activation("relu1", K::relu, b.conv("conv1", "input", 8, 3, 1));
      auto h2 = b.activation("relu2", K::relu, b.conv("gconv", h1, 8, 3, 1, 2, true));
      auto h = b.join("concat1", K::concat, {h2, h1});
      h = b.pool("pool1", K::avg_pool, h, 2);
      b.activation("softmax", K::softmax, b.dense("fc", h, 10));
      return b.finish();
    }
  }
  throw ValidationError("unknown synthetic template");
}

std::vector<double> random_input(const TensorShape& shape, std::uint64_t seed, double lo, double hi) {
  auto rng = make_rng(seed);
  std::vector<double> x(static_cast<std::size_t>(shape.size()));
  for (auto& v : x) v = uniform(rng, lo, hi);
  return x;
}

namespace {

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

GaugedModel make_gauged_positive(const Model& model, std::uint64_t seed) {
  const auto& m = model.manifest;
  const auto layout = compute_layout(m);

  // One gauge variable per channel of image-shaped blocks, per element otherwise.
  std::vector<std::size_t> var_base(layout.blocks.size());
  std::vector<std::int64_t> granularity(layout.blocks.size());
  std::size_t var_count = 0;
  std::vector<std::int32_t> node_block(static_cast<std::size_t>(layout.node_count));
  for (std::size_t b = 0; b < layout.blocks.size(); ++b) {
    const auto& blk = layout.blocks[b];
    const auto layer = m.index_of(blk.id);
    granularity[b] = m.shape(layer).is_image() ? m.shape(layer).channels() : blk.count;
    var_base[b] = var_count;
    var_count += static_cast<std::size_t>(granularity[b]);
    std::fill(node_block.begin() + blk.begin, node_block.begin() + blk.end(), static_cast<std::int32_t>(b));
  }
  auto node_var = [&](std::int64_t node) {
    const auto b = static_cast<std::size_t>(node_block[node]);
    const auto local = node - layout.blocks[b].begin;
    return var_base[b] + static_cast<std::size_t>(local % granularity[b]);
  };

  DisjointSets sets(var_count);
  for (std::size_t i = 0; i < m.layer_count(); ++i) {
    const auto kind = m.layer(i).kind;
    if (!is_pool(kind) && kind != LayerKind::add) continue;
    const auto& out = layout.element_nodes[i];
    for (auto src : m.inputs_of(i)) {
      const auto& in = layout.element_nodes[src];
      if (is_pool(kind)) {
        const auto c = m.shape(src).channels();
        for (std::int64_t e = 0; e < static_cast<std::int64_t>(in.size()); ++e) {
          sets.unite(node_var(in[e]), var_base[layout.block_of_layer[i]] + static_cast<std::size_t>(e % c));
        }
      } else {
        for (std::size_t e = 0; e < out.size(); ++e) sets.unite(node_var(in[e]), node_var(out[e]));
      }
    }
  }

  auto rng = make_rng(seed);
  std::vector<int> var_sign(var_count, 0);
  for (std::size_t v = 0; v < var_count; ++v) {
    const auto r = sets.find(v);
    if (var_sign[r] == 0) var_sign[r] = random_sign(rng);
    var_sign[v] = var_sign[r];
  }
  GaugedModel out{model.store, std::vector<int>(static_cast<std::size_t>(layout.node_count))};
  for (std::int64_t node = 0; node < layout.node_count; ++node) out.node_signs[node] = var_sign[node_var(node)];

  for (std::size_t i = 0; i < m.layer_count(); ++i) {
    const auto& l = m.layer(i);
    if (l.kind == LayerKind::batch_norm) {
      auto& bn = out.store.get_mutable(*l.weight_ref);
      const auto c = bn.shape[1];
      for (std::int64_t k = 0; k < c; ++k) bn.values[k] = std::abs(bn.values[k]);
      continue;
    }
    if (!has_trainable_weights(l.kind)) continue;
    auto& w = out.store.get_mutable(*l.weight_ref);
    const auto src = m.inputs_of(i)[0];
    const auto& in_nodes = layout.element_nodes[src];
    const auto& out_nodes = layout.element_nodes[i];
    if (l.kind == LayerKind::dense) {
      const auto n_in = static_cast<std::int64_t>(in_nodes.size());
      for (std::int64_t o = 0; o < l.params.units; ++o) {
        for (std::int64_t k = 0; k < n_in; ++k) {
          auto& v = w.values[o * n_in + k];
          v = std::abs(v) * static_cast<float>(out.node_signs[out_nodes[o]] * out.node_signs[in_nodes[k]]);
        }
      }
    } else {
      const auto& p = l.params;
      const auto cin_g = m.shape(src).channels() / p.groups;
      const auto f_g = p.filters / p.groups;
      for (std::int64_t kh = 0; kh < p.kernel.h; ++kh) {
        for (std::int64_t kw = 0; kw < p.kernel.w; ++kw) {
          for (std::int64_t ci = 0; ci < cin_g; ++ci) {
            for (std::int64_t f = 0; f < p.filters; ++f) {
              const auto out_c = (p.shuffle && p.groups > 1) ? shuffled_channel(f, p.filters, p.groups) : f;
              const auto in_c = (f / f_g) * cin_g + ci;
              // pixel 0 of each channel; signs are per channel
              const int sign = out.node_signs[out_nodes[out_c]] * out.node_signs[in_nodes[in_c]];
              auto& v = w.values[((kh * p.kernel.w + kw) * cin_g + ci) * p.filters + f];
              v = std::abs(v) * static_cast<float>(sign);
            }
          }
        }
      }
    }
  }
  return out;
}

}  // namespace frustra
