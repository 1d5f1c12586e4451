#include "tsf/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tsf/errors.hpp"

namespace tsf {

double ScoreVector::sum() const { return std::accumulate(values.begin(), values.end(), 0.0); }

std::size_t ScoreVector::argmax() const { return argmax_lowest(values); }

ScoreVector ScoreVector::uniform(std::size_t n) {
  return ScoreVector(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

template <typename T>
LayerParams<T>::LayerParams(Tensor<T> w, Tensor<T> b)
    : weights(std::move(w)),
      biases(std::move(b)),
      weight_grads(weights.dims()),
      bias_grads(biases.dims()) {}

template <typename T>
void LayerParams<T>::zero_grad() {
  weight_grads.fill(T{0});
  bias_grads.fill(T{0});
}

namespace {

template <typename T>
void check_conv_shapes(const Tensor<T>& input, const LayerParams<T>& params) {
  if (input.rank() != 3) {
    throw ShapeError("conv3x3 expects a rank-3 input, got " + format_dims(input.dims()));
  }
  const auto& w = params.weights.dims();
  if (w.size() != 4 || w[0] != 3 || w[1] != 3 || w[2] != input.dim(2)) {
    throw ShapeError("conv3x3 weight dims " + format_dims(w) + " do not fit input dims " +
                     format_dims(input.dims()));
  }
  if (params.biases.rank() != 1 || params.biases.dim(0) != w[3]) {
    throw ShapeError("conv3x3 bias dims " + format_dims(params.biases.dims()) +
                     " do not match weight dims " + format_dims(w));
  }
}

}  // namespace

template <typename T>
Tensor<T> conv3x3_forward(const Tensor<T>& input, const LayerParams<T>& params) {
  check_conv_shapes(input, params);
  const std::size_t H = input.dim(0), W = input.dim(1), Ci = input.dim(2);
  const std::size_t Co = params.weights.dim(3);
  Tensor<T> out({H, W, Co});
  const T* x = input.raw();
  const T* w = params.weights.raw();
  const T* b = params.biases.raw();
  T* o = out.raw();

  for (std::size_t i = 0; i < H; ++i) {
    for (std::size_t j = 0; j < W; ++j) {
      T* op = o + (i * W + j) * Co;
      for (std::size_t co = 0; co < Co; ++co) op[co] = b[co];
      for (std::size_t ky = 0; ky < 3; ++ky) {
        if (i + ky < 1 || i + ky > H) continue;
        const std::size_t ii = i + ky - 1;
        for (std::size_t kx = 0; kx < 3; ++kx) {
          if (j + kx < 1 || j + kx > W) continue;
          const std::size_t jj = j + kx - 1;
          const T* xp = x + (ii * W + jj) * Ci;
          const T* wp = w + (ky * 3 + kx) * Ci * Co;
          for (std::size_t ci = 0; ci < Ci; ++ci) {
            const T xv = xp[ci];
            const T* wr = wp + ci * Co;
            for (std::size_t co = 0; co < Co; ++co) op[co] += xv * wr[co];
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> conv3x3_backward(const Tensor<T>& input, LayerParams<T>& params, const Tensor<T>& upstream,
                           bool want_input_grad) {
  check_conv_shapes(input, params);
  const std::size_t H = input.dim(0), W = input.dim(1), Ci = input.dim(2);
  const std::size_t Co = params.weights.dim(3);
  const Dims expected{H, W, Co};
  if (upstream.dims() != expected) {
    throw ShapeError("conv3x3 upstream gradient dims " + format_dims(upstream.dims()) +
                     " do not match output dims " + format_dims(expected));
  }
  const T* x = input.raw();
  const T* g = upstream.raw();
  T* gw = params.weight_grads.raw();
  T* gb = params.bias_grads.raw();

  // Transposed kernel (ky, kx, co, ci) so the input-gradient inner loop runs
  // contiguously over input channels.
  std::vector<T> wt;
  Tensor<T> gx;
  if (want_input_grad) {
    gx = Tensor<T>(input.dims());
    wt.resize(9 * Ci * Co);
    const T* w = params.weights.raw();
    for (std::size_t k = 0; k < 9; ++k)
      for (std::size_t ci = 0; ci < Ci; ++ci)
        for (std::size_t co = 0; co < Co; ++co) wt[(k * Co + co) * Ci + ci] = w[(k * Ci + ci) * Co + co];
  }

  for (std::size_t i = 0; i < H; ++i) {
    for (std::size_t j = 0; j < W; ++j) {
      const T* gp = g + (i * W + j) * Co;
      for (std::size_t co = 0; co < Co; ++co) gb[co] += gp[co];
      for (std::size_t ky = 0; ky < 3; ++ky) {
        if (i + ky < 1 || i + ky > H) continue;
        const std::size_t ii = i + ky - 1;
        for (std::size_t kx = 0; kx < 3; ++kx) {
          if (j + kx < 1 || j + kx > W) continue;
          const std::size_t jj = j + kx - 1;
          const std::size_t k = ky * 3 + kx;
          const T* xp = x + (ii * W + jj) * Ci;
          T* gwp = gw + k * Ci * Co;
          for (std::size_t ci = 0; ci < Ci; ++ci) {
            const T xv = xp[ci];
            T* row = gwp + ci * Co;
            for (std::size_t co = 0; co < Co; ++co) row[co] += xv * gp[co];
          }
          if (want_input_grad) {
            T* gxp = gx.raw() + (ii * W + jj) * Ci;
            const T* wtp = wt.data() + k * Co * Ci;
            for (std::size_t co = 0; co < Co; ++co) {
              const T gv = gp[co];
              const T* row = wtp + co * Ci;
              for (std::size_t ci = 0; ci < Ci; ++ci) gxp[ci] += gv * row[ci];
            }
          }
        }
      }
    }
  }
  return gx;
}

template <typename T>
PoolResult<T> maxpool2x2(const Tensor<T>& input) {
  if (input.rank() != 3) {
    throw ShapeError("maxpool2x2 expects a rank-3 input, got " + format_dims(input.dims()));
  }
  const std::size_t H = input.dim(0), W = input.dim(1), C = input.dim(2);
  if (H < 2 || W < 2) {
    throw ShapeError("maxpool2x2 needs H, W >= 2, got " + format_dims(input.dims()));
  }
  const std::size_t Ho = H / 2, Wo = W / 2;
  PoolResult<T> r{Tensor<T>({Ho, Wo, C}), std::vector<std::uint32_t>(Ho * Wo * C)};
  const T* x = input.raw();
  for (std::size_t i = 0; i < Ho; ++i) {
    for (std::size_t j = 0; j < Wo; ++j) {
      for (std::size_t c = 0; c < C; ++c) {
        std::size_t best = ((2 * i) * W + 2 * j) * C + c;
        const std::size_t cand[3] = {((2 * i) * W + 2 * j + 1) * C + c, ((2 * i + 1) * W + 2 * j) * C + c,
                                     ((2 * i + 1) * W + 2 * j + 1) * C + c};
        for (std::size_t idx : cand) {
          if (x[idx] > x[best]) best = idx;
        }
        const std::size_t o = (i * Wo + j) * C + c;
        r.output[o] = x[best];
        r.argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return r;
}

template <typename T>
Tensor<T> maxpool2x2_backward(const Tensor<T>& upstream, std::span<const std::uint32_t> argmax,
                              const Dims& input_dims) {
  if (upstream.size() != argmax.size()) {
    throw ShapeError("maxpool2x2 upstream gradient dims " + format_dims(upstream.dims()) +
                     " do not match the recorded pooling output");
  }
  Tensor<T> gx(input_dims);
  for (std::size_t o = 0; o < argmax.size(); ++o) gx[argmax[o]] += upstream[o];
  return gx;
}

namespace {

template <typename T>
void check_dense_shapes(const Tensor<T>& input, const LayerParams<T>& params) {
  const auto& w = params.weights.dims();
  if (w.size() != 2 || input.size() != w[0]) {
    throw ShapeError("dense weight dims " + format_dims(w) + " do not fit input dims " +
                     format_dims(input.dims()));
  }
  if (params.biases.rank() != 1 || params.biases.dim(0) != w[1]) {
    throw ShapeError("dense bias dims " + format_dims(params.biases.dims()) + " do not match weight dims " +
                     format_dims(w));
  }
}

}  // namespace

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& input, const LayerParams<T>& params) {
  check_dense_shapes(input, params);
  const std::size_t Din = params.weights.dim(0), Dout = params.weights.dim(1);
  Tensor<T> out(Dims{Dout}, std::vector<T>(params.biases.values()));
  const T* x = input.raw();
  const T* w = params.weights.raw();
  T* o = out.raw();
  for (std::size_t i = 0; i < Din; ++i) {
    const T xv = x[i];
    if (xv == T{0}) continue;
    const T* row = w + i * Dout;
    for (std::size_t k = 0; k < Dout; ++k) o[k] += xv * row[k];
  }
  return out;
}

template <typename T>
Tensor<T> dense_backward(const Tensor<T>& input, LayerParams<T>& params, const Tensor<T>& upstream,
                         bool want_input_grad) {
  check_dense_shapes(input, params);
  const std::size_t Din = params.weights.dim(0), Dout = params.weights.dim(1);
  if (upstream.size() != Dout) {
    throw ShapeError("dense upstream gradient dims " + format_dims(upstream.dims()) +
                     " do not match output length " + std::to_string(Dout));
  }
  const T* x = input.raw();
  const T* g = upstream.raw();
  const T* w = params.weights.raw();
  T* gw = params.weight_grads.raw();
  T* gb = params.bias_grads.raw();
  for (std::size_t k = 0; k < Dout; ++k) gb[k] += g[k];
  Tensor<T> gx;
  if (want_input_grad) gx = Tensor<T>(input.dims());
  for (std::size_t i = 0; i < Din; ++i) {
    const T xv = x[i];
    T* row = gw + i * Dout;
    for (std::size_t k = 0; k < Dout; ++k) row[k] += xv * g[k];
    if (want_input_grad) {
      const T* wr = w + i * Dout;
      T acc{0};
      for (std::size_t k = 0; k < Dout; ++k) acc += wr[k] * g[k];
      gx[i] = acc;
    }
  }
  return gx;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
  Tensor<T> out = input;
  for (auto& v : out.data()) v = v > T{0} ? v : T{0};
  return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& upstream) {
  if (input.dims() != upstream.dims()) {
    throw ShapeError("relu upstream gradient dims " + format_dims(upstream.dims()) +
                     " do not match input dims " + format_dims(input.dims()));
  }
  Tensor<T> gx(input.dims());
  for (std::size_t i = 0; i < input.size(); ++i) gx[i] = input[i] > T{0} ? upstream[i] : T{0};
  return gx;
}

template <typename T>
ScoreVector softmax(std::span<const T> logits) {
  if (logits.size() < 2) throw ShapeError("softmax needs at least 2 logits");
  double mx = -std::numeric_limits<double>::infinity();
  for (T z : logits) {
    if (!std::isfinite(z)) throw NumericError("softmax received a non-finite logit");
    mx = std::max(mx, static_cast<double>(z));
  }
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    p[j] = std::exp(static_cast<double>(logits[j]) - mx);
    total += p[j];
  }
  for (auto& v : p) v /= total;
  return ScoreVector(std::move(p));
}

double cross_entropy_loss(const ScoreVector& probs, std::size_t label) {
  if (label >= probs.size()) {
    throw DataError("label " + std::to_string(label) + " out of range for " + std::to_string(probs.size()) +
                    " classes");
  }
  return -std::log(std::max(probs[label], kLossFloor));
}

std::vector<double> softmax_cross_entropy_grad(const ScoreVector& probs, std::size_t label) {
  if (label >= probs.size()) {
    throw DataError("label " + std::to_string(label) + " out of range for " + std::to_string(probs.size()) +
                    " classes");
  }
  std::vector<double> g = probs.values;
  g[label] -= 1.0;
  return g;
}

#define TSF_INSTANTIATE_LAYERS(T)                                                                          \
  template struct LayerParams<T>;                                                                          \
  template Tensor<T> conv3x3_forward(const Tensor<T>&, const LayerParams<T>&);                             \
  template Tensor<T> conv3x3_backward(const Tensor<T>&, LayerParams<T>&, const Tensor<T>&, bool);          \
  template PoolResult<T> maxpool2x2(const Tensor<T>&);                                                     \
  template Tensor<T> maxpool2x2_backward(const Tensor<T>&, std::span<const std::uint32_t>, const Dims&);   \
  template Tensor<T> dense_forward(const Tensor<T>&, const LayerParams<T>&);                               \
  template Tensor<T> dense_backward(const Tensor<T>&, LayerParams<T>&, const Tensor<T>&, bool);            \
  template Tensor<T> relu(const Tensor<T>&);                                                               \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                                    \
  template ScoreVector softmax(std::span<const T>);

TSF_INSTANTIATE_LAYERS(float)
TSF_INSTANTIATE_LAYERS(double)

}  // namespace tsf
