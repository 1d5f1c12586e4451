#include "tsf/network.hpp"

#include <cmath>
#include <random>

#include "tsf/binary_io.hpp"
#include "tsf/errors.hpp"

namespace tsf {

namespace {
constexpr std::string_view kCheckpointMagic = "TSCK";
constexpr std::uint32_t kCheckpointVersion = 1;
}  // namespace

std::string_view layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv3x3: return "conv3x3";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool2x2: return "maxpool2x2";
    case LayerKind::dense: return "dense";
  }
  return "unknown";
}

template <typename T>
void Network<T>::add(Layer<T> layer) {
  layers_.push_back(std::move(layer));
}

template <typename T>
void Network<T>::add_conv3x3(std::size_t in_channels, std::size_t out_channels) {
  add({LayerKind::conv3x3, LayerParams<T>(Tensor<T>({3, 3, in_channels, out_channels}), Tensor<T>({out_channels}))});
}

template <typename T>
void Network<T>::add_relu() {
  add({LayerKind::relu, {}});
}

template <typename T>
void Network<T>::add_maxpool2x2() {
  add({LayerKind::maxpool2x2, {}});
}

template <typename T>
void Network<T>::add_dense(std::size_t in_features, std::size_t out_features) {
  add({LayerKind::dense, LayerParams<T>(Tensor<T>({in_features, out_features}), Tensor<T>({out_features}))});
}

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& input, ForwardTrace<T>* trace) const {
  if (trace) {
    trace->inputs.clear();
    trace->argmax.assign(layers_.size(), {});
  }
  Tensor<T> x = input;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& layer = layers_[k];
    Tensor<T> y;
    switch (layer.kind) {
      case LayerKind::conv3x3: y = conv3x3_forward(x, layer.params); break;
      case LayerKind::relu: y = relu(x); break;
      case LayerKind::dense: y = dense_forward(x, layer.params); break;
      case LayerKind::maxpool2x2: {
        auto r = maxpool2x2(x);
        y = std::move(r.output);
        if (trace) trace->argmax[k] = std::move(r.argmax);
        break;
      }
    }
    if (trace) {
      trace->inputs.push_back(std::move(x));
    }
    x = std::move(y);
  }
  return x;
}

template <typename T>
Tensor<T> Network<T>::forward_prefix(const Tensor<T>& input, std::size_t end) const {
  if (end > layers_.size()) throw ShapeError("forward_prefix past the last layer");
  Tensor<T> x = input;
  for (std::size_t k = 0; k < end; ++k) {
    const auto& layer = layers_[k];
    switch (layer.kind) {
      case LayerKind::conv3x3: x = conv3x3_forward(x, layer.params); break;
      case LayerKind::relu: x = relu(x); break;
      case LayerKind::dense: x = dense_forward(x, layer.params); break;
      case LayerKind::maxpool2x2: x = maxpool2x2(x).output; break;
    }
  }
  return x;
}

template <typename T>
Tensor<T> Network<T>::backward(const ForwardTrace<T>& trace, const Tensor<T>& upstream, bool want_input_grad) {
  if (trace.inputs.size() != layers_.size()) {
    throw ShapeError("backward called with a trace of " + std::to_string(trace.inputs.size()) +
                     " layers on a network of " + std::to_string(layers_.size()));
  }
  Tensor<T> g = upstream;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    auto& layer = layers_[k];
    const auto& x = trace.inputs[k];
    const bool need_gx = want_input_grad || k > 0;
    switch (layer.kind) {
      case LayerKind::conv3x3: g = conv3x3_backward(x, layer.params, g, need_gx); break;
      case LayerKind::relu: g = relu_backward(x, g); break;
      case LayerKind::dense: g = dense_backward(x, layer.params, g, need_gx); break;
      case LayerKind::maxpool2x2: g = maxpool2x2_backward(g, trace.argmax[k], x.dims()); break;
    }
    if (!need_gx) break;
  }
  return want_input_grad ? g : Tensor<T>{};
}

template <typename T>
std::vector<LayerParams<T>*> Network<T>::parameters() {
  std::vector<LayerParams<T>*> out;
  for (auto& l : layers_) {
    if (!l.params.empty()) out.push_back(&l.params);
  }
  return out;
}

template <typename T>
void Network<T>::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

template <typename T>
void init_he(Network<T>& net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& layer : net.layers()) {
    if (layer.params.empty()) continue;
    const auto& wd = layer.params.weights.dims();
    const std::size_t fan_in = layer.kind == LayerKind::conv3x3 ? 9 * wd[2] : wd[0];
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (auto& w : layer.params.weights.data()) w = static_cast<T>(normal(rng));
    layer.params.biases.fill(T{0});
    layer.params.zero_grad();
  }
}

std::vector<std::uint8_t> encode_checkpoint(const Network<float>& net) {
  io::ByteWriter out;
  out.magic(kCheckpointMagic);
  out.u32(kCheckpointVersion);
  out.u32(static_cast<std::uint32_t>(net.size()));
  for (const auto& layer : net.layers()) {
    out.u32(static_cast<std::uint32_t>(layer.kind));
    if (layer.params.empty()) {
      out.u32(0);
      continue;
    }
    out.u32(2);
    for (const Tensor<float>* t : {&layer.params.weights, &layer.params.biases}) {
      out.u32(static_cast<std::uint32_t>(t->rank()));
      for (auto d : t->dims()) out.u32(static_cast<std::uint32_t>(d));
      out.f32s(t->data());
    }
  }
  return out.take();
}

Network<float> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  io::ByteReader in(bytes);
  in.expect_magic(kCheckpointMagic, "checkpoint");
  const std::size_t version_at = in.offset();
  if (const auto v = in.u32(); v != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(v), version_at);
  }
  const std::uint32_t count = in.u32();
  Network<float> net;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::size_t tag_at = in.offset();
    const auto kind = static_cast<LayerKind>(in.u32());
    const bool has_params = kind == LayerKind::conv3x3 || kind == LayerKind::dense;
    if (!has_params && kind != LayerKind::relu && kind != LayerKind::maxpool2x2) {
      throw FormatError("unknown layer kind tag " + std::to_string(static_cast<std::uint32_t>(kind)), tag_at);
    }
    const std::size_t count_at = in.offset();
    const std::uint32_t tensors = in.u32();
    if (tensors != (has_params ? 2u : 0u)) {
      throw FormatError("layer " + std::to_string(k) + " has an invalid tensor count", count_at);
    }
    if (!has_params) {
      net.add({kind, {}});
      continue;
    }
    Tensor<float> parts[2];
    for (auto& t : parts) {
      const std::size_t rank_at = in.offset();
      const std::uint32_t rank = in.u32();
      if (rank < 1 || rank > 4) throw FormatError("invalid tensor rank", rank_at);
      Dims dims(rank);
      std::size_t total = 1;
      for (auto& d : dims) {
        const std::size_t dim_at = in.offset();
        d = in.u32();
        if (d == 0) throw FormatError("zero tensor dim", dim_at);
        total *= d;
        if (total > in.remaining()) throw FormatError("tensor larger than the file", dim_at);
      }
      std::vector<float> data(total);
      in.f32s(data);
      t = Tensor<float>(std::move(dims), std::move(data));
    }
    net.add({kind, LayerParams<float>(std::move(parts[0]), std::move(parts[1]))});
  }
  in.expect_end("checkpoint");
  return net;
}

template class Network<float>;
template class Network<double>;
template void init_he(Network<float>&, std::uint64_t);
template void init_he(Network<double>&, std::uint64_t);

}  // namespace tsf
