#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "tsf/layers.hpp"
#include "tsf/tensor.hpp"

namespace tsf {

enum class LayerKind : std::uint32_t { conv3x3 = 1, relu = 2, maxpool2x2 = 3, dense = 4 };

std::string_view layer_kind_name(LayerKind kind);

template <typename T>
struct Layer {
  LayerKind kind;
  LayerParams<T> params;  // empty for relu / maxpool2x2
};

// Per-layer inputs and pooling switches recorded by a forward pass, consumed
// by the matching backward pass.
template <typename T>
struct ForwardTrace {
  std::vector<Tensor<T>> inputs;
  std::vector<std::vector<std::uint32_t>> argmax;
};

// Fixed sequential stack of the supported layers. forward() is const and
// safe to call concurrently; backward() accumulates into the gradient
// buffers and therefore needs exclusive access.
template <typename T>
class Network {
 public:
  void add(Layer<T> layer);
  void add_conv3x3(std::size_t in_channels, std::size_t out_channels);
  void add_relu();
  void add_maxpool2x2();
  void add_dense(std::size_t in_features, std::size_t out_features);

  std::size_t size() const noexcept { return layers_.size(); }
  const std::vector<Layer<T>>& layers() const noexcept { return layers_; }
  std::vector<Layer<T>>& layers() noexcept { return layers_; }

  Tensor<T> forward(const Tensor<T>& input, ForwardTrace<T>* trace = nullptr) const;
  // Runs layers [0, end) only.
  Tensor<T> forward_prefix(const Tensor<T>& input, std::size_t end) const;
  Tensor<T> backward(const ForwardTrace<T>& trace, const Tensor<T>& upstream, bool want_input_grad = false);

  std::vector<LayerParams<T>*> parameters();
  void zero_grad();

  template <typename U>
  Network<U> cast() const {
    Network<U> out;
    for (const auto& l : layers_) out.add(Layer<U>{l.kind, l.params.template cast<U>()});
    return out;
  }

 private:
  std::vector<Layer<T>> layers_;
};

// He-normal weights (std sqrt(2 / fan_in)), zero biases.
template <typename T>
void init_he(Network<T>& net, std::uint64_t seed);

// Binary checkpoint: "TSCK", version, layer count, then per layer the kind
// tag, tensor count and for each tensor its rank, dims and little-endian
// float32 values.
std::vector<std::uint8_t> encode_checkpoint(const Network<float>& net);
Network<float> decode_checkpoint(std::span<const std::uint8_t> bytes);

extern template class Network<float>;
extern template class Network<double>;

}  // namespace tsf
