#pragma once

// Network interchange representation: tensor shapes, layer specs, weight
// blobs and the validated, topologically ordered manifest.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace frustra {

/// Shape of a layer output. Images are (height, width, channels) stored
/// channels-last; vectors have a single dimension.
class TensorShape {
 public:
  TensorShape() = default;
  explicit TensorShape(std::vector<std::int64_t> dims);
  TensorShape(std::initializer_list<std::int64_t> dims)
      : TensorShape(std::vector<std::int64_t>(dims)) {}

  const std::vector<std::int64_t>& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::int64_t size() const;

  bool is_image() const { return dims_.size() == 3; }
  std::int64_t height() const { return dims_.at(0); }
  std::int64_t width() const { return dims_.at(1); }
  std::int64_t channels() const { return dims_.back(); }

  std::string to_string() const;

  friend bool operator==(const TensorShape&, const TensorShape&) = default;

 private:
  std::vector<std::int64_t> dims_;
};

enum class LayerKind {
  input,
  conv,
  grouped_conv,
  dense,
  max_pool,
  avg_pool,
  relu,
  batch_norm,
  lrn,
  softmax,
  dropout,
  add,
  concat,
};

std::string_view to_string(LayerKind kind);
LayerKind parse_layer_kind(std::string_view name);

/// Layers that own a block of graph nodes. Activation-type layers and concat
/// alias the nodes of their producers.
bool owns_nodes(LayerKind kind);
/// Elementwise maps folded into the activation of the producing layer.
bool is_activation(LayerKind kind);
/// conv, grouped_conv and dense: the layers whose parameters enter A.
bool has_trainable_weights(LayerKind kind);
bool is_pool(LayerKind kind);
bool is_convolution(LayerKind kind);

struct Extent2d {
  std::int64_t h = 1;
  std::int64_t w = 1;
  friend bool operator==(const Extent2d&, const Extent2d&) = default;
};

struct Padding2d {
  std::int64_t top = 0;
  std::int64_t bottom = 0;
  std::int64_t left = 0;
  std::int64_t right = 0;
  friend bool operator==(const Padding2d&, const Padding2d&) = default;
};

/// Kind-specific parameters. Fields irrelevant to a kind keep their defaults.
struct LayerParams {
  Extent2d kernel;  // convolution kernel or pooling window
  Extent2d stride;
  Padding2d padding;
  std::int64_t filters = 0;  // conv output channels
  std::int64_t groups = 1;
  bool shuffle = false;      // channel shuffle after a grouped conv
  std::int64_t units = 0;    // dense output size
  double bn_epsilon = 1e-5;
  double lrn_alpha = 1e-4;
  double lrn_beta = 0.75;
  double lrn_k = 1.0;
  std::int64_t lrn_size = 5;

  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

struct LayerSpec {
  std::string id;
  LayerKind kind = LayerKind::input;
  std::vector<std::string> inputs;
  LayerParams params;
  std::optional<std::string> weight_ref;
  std::optional<std::string> bias_ref;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Flat float32 tensor with its declared shape (row-major).
struct Blob {
  std::vector<std::int64_t> shape;
  std::vector<float> values;

  std::int64_t declared_size() const;
  friend bool operator==(const Blob&, const Blob&) = default;
};

class WeightStore {
 public:
  void put(std::string id, Blob blob);
  bool contains(const std::string& id) const { return blobs_.contains(id); }
  const Blob& get(const std::string& id) const;
  Blob& get_mutable(const std::string& id);
  const std::map<std::string, Blob>& blobs() const { return blobs_; }

  friend bool operator==(const WeightStore&, const WeightStore&) = default;

 private:
  std::map<std::string, Blob> blobs_;
};

/// Validated network. Layers are held in topological order (stable with
/// respect to the order they were given in); shapes are inferred once.
class NetworkManifest {
 public:
  NetworkManifest(TensorShape input_shape, std::vector<LayerSpec> layers,
                  const WeightStore& store);

  const TensorShape& input_shape() const { return input_shape_; }
  std::span<const LayerSpec> layers() const { return layers_; }
  const LayerSpec& layer(std::size_t i) const { return layers_.at(i); }
  std::size_t layer_count() const { return layers_.size(); }

  std::optional<std::size_t> find(std::string_view id) const;
  std::size_t index_of(std::string_view id) const;

  const TensorShape& shape(std::size_t i) const { return shapes_.at(i); }
  std::span<const std::size_t> inputs_of(std::size_t i) const { return input_idx_.at(i); }
  std::span<const std::size_t> consumers_of(std::size_t i) const { return consumers_.at(i); }

  /// Node-owning layer whose activation chain ends at (or is) layer i;
  /// nullopt for concat and for the input of nothing.
  std::optional<std::size_t> owner_of(std::size_t i) const;
  /// Last layer of the activation chain that starts at owning layer i.
  std::size_t chain_end(std::size_t owning) const { return chain_end_.at(owning); }

  std::size_t input_layer() const { return input_layer_; }
  std::size_t sink_layer() const { return sink_layer_; }
  /// Node-owning layer producing the logits.
  std::size_t output_layer() const { return output_layer_; }
  std::int64_t output_size() const { return shapes_.at(output_layer_).size(); }

  friend bool operator==(const NetworkManifest& a, const NetworkManifest& b) {
    return a.input_shape_ == b.input_shape_ && a.layers_ == b.layers_;
  }

 private:
  TensorShape input_shape_;
  std::vector<LayerSpec> layers_;
  std::vector<TensorShape> shapes_;
  std::vector<std::vector<std::size_t>> input_idx_;
  std::vector<std::vector<std::size_t>> consumers_;
  std::vector<std::optional<std::size_t>> owner_;
  std::vector<std::size_t> chain_end_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::size_t input_layer_ = 0;
  std::size_t sink_layer_ = 0;
  std::size_t output_layer_ = 0;
};

/// Output extent of a sliding window along one axis (no dilation).
std::int64_t window_output_extent(std::int64_t in, std::int64_t pad_lo, std::int64_t pad_hi,
                                  std::int64_t window, std::int64_t stride);

/// Expected weight blob shape for a trainable layer given its input shape.
std::vector<std::int64_t> expected_weight_shape(const LayerSpec& layer, const TensorShape& in);

/// Position of pre-shuffle channel c among `channels` channels split in `groups` groups.
std::int64_t shuffled_channel(std::int64_t c, std::int64_t channels, std::int64_t groups);

}  // namespace frustra
