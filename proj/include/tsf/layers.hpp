#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tsf/scores.hpp"
#include "tsf/tensor.hpp"

namespace tsf {

// Parameters of one layer plus gradient buffers of the same dims.
template <typename T>
struct LayerParams {
  Tensor<T> weights;
  Tensor<T> biases;
  Tensor<T> weight_grads;
  Tensor<T> bias_grads;

  LayerParams() = default;
  LayerParams(Tensor<T> w, Tensor<T> b);

  void zero_grad();
  bool empty() const noexcept { return weights.empty(); }

  template <typename U>
  LayerParams<U> cast() const {
    if (empty()) return {};
    LayerParams<U> out(weights.template cast<U>(), biases.template cast<U>());
    out.weight_grads = weight_grads.template cast<U>();
    out.bias_grads = bias_grads.template cast<U>();
    return out;
  }
};

// 3x3 stride-1 convolution with zero padding 1. Input H x W x Cin, weights
// 3 x 3 x Cin x Cout, biases Cout. Output keeps H x W.
template <typename T>
Tensor<T> conv3x3_forward(const Tensor<T>& input, const LayerParams<T>& params);

// Accumulates into params.weight_grads / bias_grads and returns the input
// gradient (empty tensor when want_input_grad is false).
template <typename T>
Tensor<T> conv3x3_backward(const Tensor<T>& input, LayerParams<T>& params, const Tensor<T>& upstream,
                           bool want_input_grad = true);

template <typename T>
struct PoolResult {
  Tensor<T> output;
  // Flat input index of the winning element for each output element.
  std::vector<std::uint32_t> argmax;
};

// 2x2 stride-2 max pooling. Odd trailing rows/columns are dropped; ties go
// to the first element of the window in row-major order.
template <typename T>
PoolResult<T> maxpool2x2(const Tensor<T>& input);

template <typename T>
Tensor<T> maxpool2x2_backward(const Tensor<T>& upstream, std::span<const std::uint32_t> argmax,
                              const Dims& input_dims);

// out = W^T x + b with W stored D_in x D_out. Any input rank is accepted as
// long as its element count is D_in; the output is rank 1.
template <typename T>
Tensor<T> dense_forward(const Tensor<T>& input, const LayerParams<T>& params);

template <typename T>
Tensor<T> dense_backward(const Tensor<T>& input, LayerParams<T>& params, const Tensor<T>& upstream,
                         bool want_input_grad = true);

template <typename T>
Tensor<T> relu(const Tensor<T>& input);

// Gradient passes only where input > 0 (zero at the kink).
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& upstream);

inline constexpr double kLossFloor = 1e-12;

// Max-shifted softmax. Requires n >= 2 finite logits.
template <typename T>
ScoreVector softmax(std::span<const T> logits);

template <typename T>
ScoreVector softmax(const Tensor<T>& logits) {
  return softmax(logits.data());
}

// -ln(max(probs[label], kLossFloor)).
double cross_entropy_loss(const ScoreVector& probs, std::size_t label);

// d(CE(softmax(z)))/dz = probs - one_hot(label).
std::vector<double> softmax_cross_entropy_grad(const ScoreVector& probs, std::size_t label);

}  // namespace tsf
