#include "frustra/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>
#include <utility>

#include "frustra/error.hpp"

namespace frustra {

namespace {

[[noreturn]] void fail(const std::string& layer_id, const std::string& what) {
  throw ValidationError("layer '" + layer_id + "': " + what);
}

constexpr std::array<std::pair<LayerKind, std::string_view>, 13> kKindNames{{
    {LayerKind::input, "input"},
    {LayerKind::conv, "conv"},
    {LayerKind::grouped_conv, "grouped_conv"},
    {LayerKind::dense, "dense"},
    {LayerKind::max_pool, "max_pool"},
    {LayerKind::avg_pool, "avg_pool"},
    {LayerKind::relu, "relu"},
    {LayerKind::batch_norm, "batch_norm"},
    {LayerKind::lrn, "lrn"},
    {LayerKind::softmax, "softmax"},
    {LayerKind::dropout, "dropout"},
    {LayerKind::add, "add"},
    {LayerKind::concat, "concat"},
}};

}  // namespace

TensorShape::TensorShape(std::vector<std::int64_t> dims) : dims_(std::move(dims)) {
  if (dims_.empty()) throw ValidationError("tensor shape must have at least one dimension");
  for (auto d : dims_) {
    if (d < 1) throw ValidationError("tensor dimension must be >= 1, got " + std::to_string(d));
  }
}

std::int64_t TensorShape::size() const {
  return std::accumulate(dims_.begin(), dims_.end(), std::int64_t{1}, std::multiplies<>());
}

std::string TensorShape::to_string() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < dims_.size(); ++i) os << (i ? "x" : "") << dims_[i];
  return os.str();
}

std::string_view to_string(LayerKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

LayerKind parse_layer_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  throw ValidationError("unknown layer kind '" + std::string(name) + "'");
}

bool owns_nodes(LayerKind kind) {
  switch (kind) {
    case LayerKind::input:
    case LayerKind::conv:
    case LayerKind::grouped_conv:
    case LayerKind::dense:
    case LayerKind::max_pool:
    case LayerKind::avg_pool:
    case LayerKind::add:
      return true;
    default:
      return false;
  }
}

bool is_activation(LayerKind kind) {
  switch (kind) {
    case LayerKind::relu:
    case LayerKind::batch_norm:
    case LayerKind::lrn:
    case LayerKind::softmax:
    case LayerKind::dropout:
      return true;
    default:
      return false;
  }
}

bool has_trainable_weights(LayerKind kind) {
  return kind == LayerKind::conv || kind == LayerKind::grouped_conv || kind == LayerKind::dense;
}

bool is_pool(LayerKind kind) { return kind == LayerKind::max_pool || kind == LayerKind::avg_pool; }

bool is_convolution(LayerKind kind) {
  return kind == LayerKind::conv || kind == LayerKind::grouped_conv;
}

std::int64_t Blob::declared_size() const {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
}

void WeightStore::put(std::string id, Blob blob) {
  if (blob.declared_size() != static_cast<std::int64_t>(blob.values.size())) {
    throw ValidationError("blob '" + id + "': blob length mismatch (declared " +
                          std::to_string(blob.declared_size()) + ", payload " +
                          std::to_string(blob.values.size()) + ")");
  }
  for (float v : blob.values) {
    if (!std::isfinite(v)) throw ValidationError("blob '" + id + "': non-finite value");
  }
  blobs_.insert_or_assign(std::move(id), std::move(blob));
}

const Blob& WeightStore::get(const std::string& id) const {
  auto it = blobs_.find(id);
  if (it == blobs_.end()) throw ValidationError("unknown blob '" + id + "'");
  return it->second;
}

Blob& WeightStore::get_mutable(const std::string& id) {
  auto it = blobs_.find(id);
  if (it == blobs_.end()) throw ValidationError("unknown blob '" + id + "'");
  return it->second;
}

std::int64_t window_output_extent(std::int64_t in, std::int64_t pad_lo, std::int64_t pad_hi,
                                  std::int64_t window, std::int64_t stride) {
  const std::int64_t padded = in + pad_lo + pad_hi;
  if (window < 1 || stride < 1 || padded < window) return 0;
  return (padded - window) / stride + 1;
}

std::vector<std::int64_t> expected_weight_shape(const LayerSpec& layer, const TensorShape& in) {
  const auto& p = layer.params;
  switch (layer.kind) {
    case LayerKind::conv:
    case LayerKind::grouped_conv:
      return {p.kernel.h, p.kernel.w, in.channels() / p.groups, p.filters};
    case LayerKind::dense:
      return {p.units, in.size()};
    case LayerKind::batch_norm:
      return {4, in.channels()};
    default:
      return {};
  }
}

std::int64_t shuffled_channel(std::int64_t c, std::int64_t channels, std::int64_t groups) {
  // channel j of group i moves to slot i of output group j
  const std::int64_t per_group = channels / groups;
  const std::int64_t i = c / per_group;
  const std::int64_t j = c % per_group;
  return j * groups + i;
}

NetworkManifest::NetworkManifest(TensorShape input_shape, std::vector<LayerSpec> layers,
                                 const WeightStore& store)
    : input_shape_(std::move(input_shape)) {
  if (layers.empty()) throw ValidationError("manifest has no layers");

  std::map<std::string, std::size_t, std::less<>> given_index;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.id.empty()) throw ValidationError("layer #" + std::to_string(i) + " has an empty id");
    if (!given_index.emplace(l.id, i).second) fail(l.id, "duplicate layer id");
  }

  // Kahn's algorithm; ties broken by the order the layers were given in.
  const std::size_t count = layers.size();
  std::vector<std::vector<std::size_t>> succ(count);
  std::vector<std::size_t> indegree(count, 0);
  std::size_t input_count = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const auto& l = layers[i];
    if (l.kind == LayerKind::input) {
      ++input_count;
      if (!l.inputs.empty()) fail(l.id, "input layer must not have inputs");
      continue;
    }
    if (l.inputs.empty()) fail(l.id, "layer has no inputs");
    std::vector<std::string> seen;
    for (const auto& src : l.inputs) {
      auto it = given_index.find(src);
      if (it == given_index.end()) fail(l.id, "unknown input layer '" + src + "'");
      if (std::find(seen.begin(), seen.end(), src) != seen.end()) {
        fail(l.id, "input '" + src + "' listed twice");
      }
      seen.push_back(src);
      succ[it->second].push_back(i);
      ++indegree[i];
    }
  }
  if (input_count != 1) {
    throw ValidationError("manifest must have exactly one input layer, found " +
                          std::to_string(input_count));
  }

  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < count; ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  std::vector<std::size_t> order;
  order.reserve(count);
  while (!ready.empty()) {
    auto i = ready.top();
    ready.pop();
    order.push_back(i);
    for (auto s : succ[i]) {
      if (--indegree[s] == 0) ready.push(s);
    }
  }
  if (order.size() != count) {
    for (std::size_t i = 0; i < count; ++i) {
      if (indegree[i] > 0) fail(layers[i].id, "cycle detected");
    }
  }

  layers_.reserve(count);
  for (auto i : order) layers_.push_back(std::move(layers[i]));
  for (std::size_t i = 0; i < count; ++i) index_.emplace(layers_[i].id, i);

  input_idx_.resize(count);
  consumers_.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    for (const auto& src : layers_[i].inputs) {
      auto j = index_.at(src);
      input_idx_[i].push_back(j);
      consumers_[j].push_back(i);
    }
  }

  // Shape inference and per-kind checks.
  shapes_.resize(count);
  owner_.assign(count, std::nullopt);
  chain_end_.resize(count);
  std::iota(chain_end_.begin(), chain_end_.end(), std::size_t{0});

  auto check_blob = [&](const LayerSpec& l, const std::optional<std::string>& ref,
                        const std::vector<std::int64_t>& want, const char* what) {
    if (!ref) return;
    if (!store.contains(*ref)) fail(l.id, std::string("dangling ") + what + " '" + *ref + "'");
    const Blob& b = store.get(*ref);
    if (b.shape != want || b.declared_size() != static_cast<std::int64_t>(b.values.size())) {
      std::string w;
      for (auto d : want) w += (w.empty() ? "" : "x") + std::to_string(d);
      fail(l.id, std::string("blob length mismatch for ") + what + " '" + *ref +
                     "' (expected shape " + w + ")");
    }
  };

  for (std::size_t i = 0; i < count; ++i) {
    auto& l = layers_[i];
    auto& p = l.params;
    const auto& ins = input_idx_[i];
    auto require_arity = [&](std::size_t lo, std::size_t hi) {
      if (ins.size() < lo || ins.size() > hi) fail(l.id, "wrong number of inputs");
    };
    auto in_shape = [&](std::size_t k) -> const TensorShape& { return shapes_[ins.at(k)]; };

    if (!has_trainable_weights(l.kind) && l.kind != LayerKind::batch_norm && l.weight_ref) {
      fail(l.id, "layer kind does not take weights");
    }
    if (!has_trainable_weights(l.kind) && l.bias_ref) fail(l.id, "layer kind does not take a bias");

    switch (l.kind) {
      case LayerKind::input:
        input_layer_ = i;
        shapes_[i] = input_shape_;
        break;
      case LayerKind::conv:
      case LayerKind::grouped_conv: {
        require_arity(1, 1);
        const auto& in = in_shape(0);
        if (!in.is_image()) fail(l.id, "convolution needs an image-shaped input");
        if (l.kind == LayerKind::conv && p.groups != 1) fail(l.id, "plain conv must have groups = 1");
        if (p.groups < 1) fail(l.id, "group count must be >= 1");
        if (p.filters < 1) fail(l.id, "filters must be >= 1");
        if (in.channels() % p.groups != 0) fail(l.id, "channel count not divisible by group count");
        if (p.filters % p.groups != 0) fail(l.id, "filter count not divisible by group count");
        if (p.stride.h < 1 || p.stride.w < 1) fail(l.id, "stride must be >= 1");
        const auto oh = window_output_extent(in.height(), p.padding.top, p.padding.bottom,
                                             p.kernel.h, p.stride.h);
        const auto ow = window_output_extent(in.width(), p.padding.left, p.padding.right,
                                             p.kernel.w, p.stride.w);
        if (oh < 1 || ow < 1) fail(l.id, "kernel larger than padded input");
        shapes_[i] = TensorShape{oh, ow, p.filters};
        if (!l.weight_ref) fail(l.id, "missing weight_ref");
        check_blob(l, l.weight_ref, expected_weight_shape(l, in), "weights");
        check_blob(l, l.bias_ref, {p.filters}, "bias");
        break;
      }
      case LayerKind::dense: {
        require_arity(1, 1);
        if (p.units < 1) fail(l.id, "units must be >= 1");
        shapes_[i] = TensorShape{p.units};
        if (!l.weight_ref) fail(l.id, "missing weight_ref");
        check_blob(l, l.weight_ref, expected_weight_shape(l, in_shape(0)), "weights");
        check_blob(l, l.bias_ref, {p.units}, "bias");
        break;
      }
      case LayerKind::max_pool:
      case LayerKind::avg_pool: {
        require_arity(1, 1);
        const auto& in = in_shape(0);
        if (!in.is_image()) fail(l.id, "pooling needs an image-shaped input");
        if (p.stride.h < 1 || p.stride.w < 1) fail(l.id, "stride must be >= 1");
        const auto oh = window_output_extent(in.height(), p.padding.top, p.padding.bottom,
                                             p.kernel.h, p.stride.h);
        const auto ow = window_output_extent(in.width(), p.padding.left, p.padding.right,
                                             p.kernel.w, p.stride.w);
        if (oh < 1 || ow < 1) fail(l.id, "window larger than padded input");
        shapes_[i] = TensorShape{oh, ow, in.channels()};
        break;
      }
      case LayerKind::relu:
      case LayerKind::batch_norm:
      case LayerKind::lrn:
      case LayerKind::softmax:
      case LayerKind::dropout: {
        require_arity(1, 1);
        const auto src = ins[0];
        const auto src_kind = layers_[src].kind;
        if (!(owns_nodes(src_kind) && src_kind != LayerKind::input) && !is_activation(src_kind)) {
          fail(l.id, "activation must follow a weight, pooling, add or activation layer");
        }
        if (consumers_[src].size() != 1) {
          fail(l.id, "input '" + layers_[src].id +
                         "' feeds an activation and other layers; branch after the activation");
        }
        shapes_[i] = in_shape(0);
        owner_[i] = owner_[src];
        chain_end_[*owner_[src]] = i;
        if (l.kind == LayerKind::batch_norm) {
          if (!l.weight_ref) fail(l.id, "missing weight_ref");
          check_blob(l, l.weight_ref, expected_weight_shape(l, shapes_[i]), "batch-norm constants");
          if (!(p.bn_epsilon > 0)) fail(l.id, "batch-norm epsilon must be > 0");
        }
        if (l.kind == LayerKind::lrn) {
          if (p.lrn_size < 1 || !(p.lrn_k > 0) || !(p.lrn_alpha >= 0) || !(p.lrn_beta >= 0)) {
            fail(l.id, "invalid local response normalization parameters");
          }
        }
        if (l.kind == LayerKind::softmax && !consumers_[i].empty()) {
          fail(l.id, "softmax must be the final layer");
        }
        break;
      }
      case LayerKind::add: {
        if (ins.size() < 2) fail(l.id, "add needs at least two inputs");
        for (std::size_t k = 1; k < ins.size(); ++k) {
          if (!(in_shape(k) == in_shape(0))) {
            fail(l.id, "add inputs have unequal shapes (" + in_shape(0).to_string() + " vs " +
                           in_shape(k).to_string() + ")");
          }
        }
        shapes_[i] = in_shape(0);
        break;
      }
      case LayerKind::concat: {
        if (ins.size() < 2) fail(l.id, "concat needs at least two inputs");
        const auto& first = in_shape(0);
        std::int64_t total = 0;
        for (std::size_t k = 0; k < ins.size(); ++k) {
          const auto& s = in_shape(k);
          if (s.rank() != first.rank()) fail(l.id, "concat inputs have different ranks");
          if (s.is_image() && (s.height() != first.height() || s.width() != first.width())) {
            fail(l.id, "concat inputs have mismatched spatial dimensions");
          }
          total += s.channels();
        }
        if (first.is_image()) {
          shapes_[i] = TensorShape{first.height(), first.width(), total};
        } else if (first.rank() == 1) {
          shapes_[i] = TensorShape{total};
        } else {
          fail(l.id, "concat supports vectors and images only");
        }
        break;
      }
    }
    if (owns_nodes(l.kind)) owner_[i] = i;
  }

  std::vector<std::size_t> sinks;
  for (std::size_t i = 0; i < count; ++i) {
    if (consumers_[i].empty()) sinks.push_back(i);
  }
  if (sinks.size() != 1) {
    throw ValidationError("manifest must have exactly one output layer, found " +
                          std::to_string(sinks.size()));
  }
  sink_layer_ = sinks[0];
  if (!owner_[sink_layer_] || layers_[sink_layer_].kind == LayerKind::input) {
    fail(layers_[sink_layer_].id, "output must be produced by a weight, pooling or add layer");
  }
  output_layer_ = *owner_[sink_layer_];
}

std::optional<std::size_t> NetworkManifest::find(std::string_view id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t NetworkManifest::index_of(std::string_view id) const {
  auto i = find(id);
  if (!i) throw ValidationError("unknown layer '" + std::string(id) + "'");
  return *i;
}

std::optional<std::size_t> NetworkManifest::owner_of(std::size_t i) const { return owner_.at(i); }

}  // namespace frustra
