#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "tsf/network.hpp"

namespace tsf {

struct GradCheckOptions {
  double epsilon = 1e-5;
  // With a label the scalar loss is CE(softmax(output), label); otherwise it
  // is <probe, output> for a seeded random probe of the output's dims.
  std::optional<std::size_t> label;
  std::uint64_t probe_seed = 7;
  bool check_input = true;
  // Multiplies the analytic gradient before comparison. Only useful to
  // confirm the checker itself flags a wrong gradient.
  double analytic_scale = 1.0;
  // Skip components whose +-epsilon probes change a ReLU sign or a pooling
  // winner: the central difference straddles a kink there and measures
  // nothing. Skipped components are counted in `kinks`.
  bool skip_kinks = true;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst;  // e.g. "layer 3 (dense) weight 17" or "input 4"
  double worst_analytic = 0.0, worst_numeric = 0.0;
  std::size_t checked = 0;
  std::size_t kinks = 0;
};

// Compares backprop gradients against central differences. The relative
// error per component is |a - n| / max(|a|, |n|, 1e-8); the maximum over
// all parameters (and the input, if requested) is returned.
GradCheckResult finite_difference_check(Network<double>& net, const Tensor<double>& input,
                                        const GradCheckOptions& options = {});

}  // namespace tsf
