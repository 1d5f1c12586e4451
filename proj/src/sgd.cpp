#include "tsf/sgd.hpp"

#include <cmath>
#include <string>

#include "tsf/errors.hpp"

namespace tsf {

void SgdConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InputError("learning_rate must be finite and >= 0, got " + std::to_string(learning_rate));
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw InputError("momentum must be in [0, 1), got " + std::to_string(momentum));
  }
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw InputError("weight_decay must be >= 0, got " + std::to_string(weight_decay));
  }
}

void SgdConfig::validate_strict() const {
  validate();
  if (!(learning_rate > 0.0)) throw InputError("learning_rate must be > 0");
}

template <typename T>
SgdOptimizer<T>::SgdOptimizer(SgdConfig config) : config_(config) {
  config_.validate();
}

namespace {

template <typename T>
void update(std::span<T> w, std::span<T> g, std::vector<T>& v, T lr, T mu, T decay) {
  if (v.size() != w.size()) v.assign(w.size(), T{0});
  for (std::size_t i = 0; i < w.size(); ++i) {
    v[i] = mu * v[i] - lr * (g[i] + decay * w[i]);
    w[i] += v[i];
    g[i] = T{0};
  }
}

}  // namespace

template <typename T>
void SgdOptimizer<T>::step(std::span<LayerParams<T>* const> params) {
  if (weight_velocity_.size() != params.size()) {
    weight_velocity_.assign(params.size(), {});
    bias_velocity_.assign(params.size(), {});
  }
  const T lr = static_cast<T>(config_.learning_rate);
  const T mu = static_cast<T>(config_.momentum);
  const T decay = static_cast<T>(config_.weight_decay);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    update(p.weights.data(), p.weight_grads.data(), weight_velocity_[k], lr, mu, decay);
    update(p.biases.data(), p.bias_grads.data(), bias_velocity_[k], lr, mu, T{0});
  }
}

template class SgdOptimizer<float>;
template class SgdOptimizer<double>;

}  // namespace tsf
