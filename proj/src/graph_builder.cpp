#include "frustra/graph_builder.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "frustra/error.hpp"
#include "frustra/parallel.hpp"

namespace frustra {

NodeLayout compute_layout(const NetworkManifest& m) {
  NodeLayout layout;
  const auto count = m.layer_count();
  layout.block_of_layer.assign(count, -1);
  layout.element_nodes.resize(count);

  for (std::size_t i = 0; i < count; ++i) {
    const auto& l = m.layer(i);
    const auto size = m.shape(i).size();
    auto& nodes = layout.element_nodes[i];
    if (owns_nodes(l.kind)) {
      layout.block_of_layer[i] = static_cast<std::int32_t>(layout.blocks.size());
      layout.blocks.push_back(LayerBlock{l.id, l.kind, layout.node_count, size});
      nodes.resize(static_cast<std::size_t>(size));
      std::iota(nodes.begin(), nodes.end(), layout.node_count);
      layout.node_count += size;
    } else if (is_activation(l.kind)) {
      nodes = layout.element_nodes[m.inputs_of(i)[0]];
    } else if (l.kind == LayerKind::concat) {
      const auto& out = m.shape(i);
      nodes.resize(static_cast<std::size_t>(size));
      if (out.is_image()) {
        const auto pixels = out.height() * out.width();
        std::int64_t offset = 0;
        for (auto src : m.inputs_of(i)) {
          const auto c_in = m.shape(src).channels();
          const auto& src_nodes = layout.element_nodes[src];
          for (std::int64_t px = 0; px < pixels; ++px) {
            for (std::int64_t c = 0; c < c_in; ++c) {
              nodes[px * out.channels() + offset + c] = src_nodes[px * c_in + c];
            }
          }
          offset += c_in;
        }
      } else {
        std::size_t k = 0;
        for (auto src : m.inputs_of(i)) {
          for (auto node : layout.element_nodes[src]) nodes[k++] = node;
        }
      }
    }
  }
  layout.input_block = layout.block_of_layer[m.input_layer()];
  layout.output_block = layout.block_of_layer[m.output_layer()];
  return layout;
}

double pool_edge_weight(const Extent2d& window) {
  return 0.01 / std::sqrt(static_cast<double>(window.h * window.w));
}

namespace {

void expand_windows(const LayerSpec& layer, const TensorShape& in, std::int64_t out_channels,
                    std::int64_t groups, const std::function<void(std::int64_t row, std::int64_t col,
                                                                  std::int64_t f, std::int64_t ci,
                                                                  std::int64_t kh, std::int64_t kw)>& emit) {
  const auto& p = layer.params;
  const auto oh_n = window_output_extent(in.height(), p.padding.top, p.padding.bottom, p.kernel.h, p.stride.h);
  const auto ow_n = window_output_extent(in.width(), p.padding.left, p.padding.right, p.kernel.w, p.stride.w);
  if (oh_n < 1 || ow_n < 1) {
    throw ValidationError("layer '" + layer.id + "': window larger than padded input");
  }
  const auto C = in.channels();
  const auto W = in.width();
  const auto cin_g = C / groups;
  const auto f_g = out_channels / groups;
  for (std::int64_t oh = 0; oh < oh_n; ++oh) {
    for (std::int64_t ow = 0; ow < ow_n; ++ow) {
      for (std::int64_t f = 0; f < out_channels; ++f) {
        const auto out_c = (layer.params.shuffle && groups > 1) ? shuffled_channel(f, out_channels, groups) : f;
        const auto row = (oh * ow_n + ow) * out_channels + out_c;
        const auto grp = f / f_g;
        for (std::int64_t kh = 0; kh < p.kernel.h; ++kh) {
          const auto ih = oh * p.stride.h - p.padding.top + kh;
          if (ih < 0 || ih >= in.height()) continue;  // padded position: no edge
          for (std::int64_t kw = 0; kw < p.kernel.w; ++kw) {
            const auto iw = ow * p.stride.w - p.padding.left + kw;
            if (iw < 0 || iw >= W) continue;
            for (std::int64_t ci = 0; ci < cin_g; ++ci) {
              const auto col = (ih * W + iw) * C + grp * cin_g + ci;
              emit(row, col, f, ci, kh, kw);
            }
          }
        }
      }
    }
  }
}

void check_conv(const LayerSpec& layer, const Blob& weights, const TensorShape& in) {
  if (!in.is_image()) throw ValidationError("layer '" + layer.id + "': convolution needs an image input");
  const auto& p = layer.params;
  if (p.groups < 1 || in.channels() % p.groups != 0 || p.filters % p.groups != 0) {
    throw ValidationError("layer '" + layer.id + "': channel count not divisible by group count");
  }
  if (p.stride.h < 1 || p.stride.w < 1) throw ValidationError("layer '" + layer.id + "': stride must be >= 1");
  if (weights.shape != expected_weight_shape(layer, in)) {
    throw ValidationError("layer '" + layer.id + "': weight blob shape does not match kernel");
  }
}

}  // namespace

EdgeBlock expand_grouped_conv(const LayerSpec& layer, const Blob& weights, const TensorShape& in) {
  check_conv(layer, weights, in);
  const auto& p = layer.params;
  const auto cin_g = in.channels() / p.groups;
  EdgeBlock block;
  expand_windows(layer, in, p.filters, p.groups,
                 [&](std::int64_t row, std::int64_t col, std::int64_t f, std::int64_t ci,
                     std::int64_t kh, std::int64_t kw) {
                   const auto param = ((kh * p.kernel.w + kw) * cin_g + ci) * p.filters + f;
                   const double w = weights.values[static_cast<std::size_t>(param)];
                   if (w == 0.0) return;
                   block.rows.push_back(row);
                   block.cols.push_back(col);
                   block.weights.push_back(w);
                   block.params.push_back(param);
                 });
  return block;
}

EdgeBlock expand_conv(const LayerSpec& layer, const Blob& weights, const TensorShape& in) {
  if (layer.params.groups != 1) {
    throw ValidationError("layer '" + layer.id + "': plain conv must have groups = 1");
  }
  return expand_grouped_conv(layer, weights, in);
}

EdgeBlock expand_pool(const LayerSpec& layer, const TensorShape& in) {
  if (!in.is_image()) throw ValidationError("layer '" + layer.id + "': pooling needs an image input");
  if (layer.params.stride.h < 1 || layer.params.stride.w < 1) {
    throw ValidationError("layer '" + layer.id + "': stride must be >= 1");
  }
  const double w = pool_edge_weight(layer.params.kernel);
  const auto C = in.channels();
  EdgeBlock block;
  // depthwise window: one "group" per channel, one input channel each
  expand_windows(layer, in, C, C,
                 [&](std::int64_t row, std::int64_t col, std::int64_t, std::int64_t, std::int64_t,
                     std::int64_t) {
                   block.rows.push_back(row);
                   block.cols.push_back(col);
                   block.weights.push_back(w);
                   block.params.push_back(-1);
                 });
  return block;
}

EdgeBlock expand_dense(const LayerSpec& layer, const Blob& weights, const TensorShape& in) {
  const auto n_in = in.size();
  const auto units = layer.params.units;
  if (weights.shape != std::vector<std::int64_t>{units, n_in}) {
    throw ValidationError("layer '" + layer.id + "': weight blob shape does not match dense layer");
  }
  EdgeBlock block;
  for (std::int64_t o = 0; o < units; ++o) {
    for (std::int64_t i = 0; i < n_in; ++i) {
      const auto param = o * n_in + i;
      const double w = weights.values[static_cast<std::size_t>(param)];
      if (w == 0.0) continue;
      block.rows.push_back(o);
      block.cols.push_back(i);
      block.weights.push_back(w);
      block.params.push_back(param);
    }
  }
  return block;
}

SignedSparseGraph assemble(const NetworkManifest& m, const WeightStore& store) {
  const auto layout = compute_layout(m);
  std::vector<std::size_t> owning;
  for (std::size_t i = 0; i < m.layer_count(); ++i) {
    if (owns_nodes(m.layer(i).kind) && m.layer(i).kind != LayerKind::input) owning.push_back(i);
  }

  std::vector<std::vector<Triplet>> per_layer(owning.size());
  parallel_for(owning.size(), [&](std::size_t k) {
    const auto i = owning[k];
    const auto& l = m.layer(i);
    const auto block = layout.block_of_layer[i];
    const auto& out_nodes = layout.element_nodes[i];
    auto& triplets = per_layer[k];
    auto place = [&](const EdgeBlock& eb, const std::vector<std::int64_t>& in_nodes) {
      triplets.reserve(triplets.size() + eb.size());
      for (std::size_t e = 0; e < eb.size(); ++e) {
        triplets.push_back(Triplet{out_nodes[eb.rows[e]], in_nodes[eb.cols[e]], eb.weights[e],
                                   EdgeProvenance{block, eb.params[e]}});
      }
    };
    const auto src = m.inputs_of(i);
    switch (l.kind) {
      case LayerKind::conv:
        place(expand_conv(l, store.get(*l.weight_ref), m.shape(src[0])), layout.element_nodes[src[0]]);
        break;
      case LayerKind::grouped_conv:
        place(expand_grouped_conv(l, store.get(*l.weight_ref), m.shape(src[0])),
              layout.element_nodes[src[0]]);
        break;
      case LayerKind::dense:
        place(expand_dense(l, store.get(*l.weight_ref), m.shape(src[0])), layout.element_nodes[src[0]]);
        break;
      case LayerKind::max_pool:
      case LayerKind::avg_pool:
        place(expand_pool(l, m.shape(src[0])), layout.element_nodes[src[0]]);
        break;
      case LayerKind::add:
        for (auto s : src) {
          const auto& in_nodes = layout.element_nodes[s];
          for (std::size_t e = 0; e < out_nodes.size(); ++e) {
            triplets.push_back(Triplet{out_nodes[e], in_nodes[e], 1.0, EdgeProvenance{block, -1}});
          }
        }
        break;
      default:
        break;
    }
  });

  std::size_t total = 0;
  for (const auto& t : per_layer) total += t.size();
  std::vector<Triplet> all;
  all.reserve(total);
  for (auto& t : per_layer) {
    all.insert(all.end(), t.begin(), t.end());
    std::vector<Triplet>().swap(t);
  }
  return SignedSparseGraph::from_triplets(layout.node_count, std::move(all), layout.blocks);
}

}  // namespace frustra
