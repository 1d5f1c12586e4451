#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tsf/layers.hpp"

namespace tsf {

struct SgdConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::uint64_t seed = 1;

  // Throws InputError when a field is out of range. A zero learning rate is
  // accepted here for probing (no-op steps); use validate_strict() to enforce
  // learning_rate > 0.
  void validate() const;
  void validate_strict() const;
};

// Momentum SGD with L2 weight decay:
//   v <- momentum * v - lr * (grad + weight_decay * w);  w <- w + v
// Biases are not decayed. Gradient buffers are zeroed after every step.
template <typename T>
class SgdOptimizer {
 public:
  explicit SgdOptimizer(SgdConfig config);

  void step(std::span<LayerParams<T>* const> params);

  const SgdConfig& config() const noexcept { return config_; }

 private:
  SgdConfig config_;
  std::vector<std::vector<T>> weight_velocity_;
  std::vector<std::vector<T>> bias_velocity_;
};

extern template class SgdOptimizer<float>;
extern template class SgdOptimizer<double>;

}  // namespace tsf
