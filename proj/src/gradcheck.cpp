#include "tsf/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace tsf {

namespace {

struct LossFn {
  const GradCheckOptions& opt;
  Tensor<double> probe;

  double value(const Tensor<double>& out) const {
    if (opt.label) return cross_entropy_loss(softmax(out.data()), *opt.label);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += probe[i] * out[i];
    return s;
  }

  Tensor<double> grad(const Tensor<double>& out) const {
    if (opt.label) {
      auto g = softmax_cross_entropy_grad(softmax(out.data()), *opt.label);
      return Tensor<double>(out.dims(), std::move(g));
    }
    return probe;
  }
};

// ReLU input signs and pooling winners of one forward pass. Away from kinks
// the loss is smooth in every parameter, so two passes with equal patterns
// lie on the same smooth piece.
struct Pattern {
  std::vector<bool> positive;
  std::vector<std::uint32_t> winners;
  bool operator==(const Pattern&) const = default;
};

Pattern pattern_of(const Network<double>& net, const ForwardTrace<double>& trace) {
  Pattern p;
  const auto& layers = net.layers();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (layers[k].kind == LayerKind::relu) {
      for (double v : trace.inputs[k].data()) p.positive.push_back(v > 0.0);
    } else if (layers[k].kind == LayerKind::maxpool2x2) {
      p.winners.insert(p.winners.end(), trace.argmax[k].begin(), trace.argmax[k].end());
    }
  }
  return p;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

}  // namespace

GradCheckResult finite_difference_check(Network<double>& net, const Tensor<double>& input,
                                        const GradCheckOptions& options) {
  const Tensor<double> out0 = net.forward(input);
  LossFn loss{options, Tensor<double>(out0.dims())};
  if (!options.label) {
    std::mt19937_64 rng(options.probe_seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& v : loss.probe.data()) v = u(rng);
  }

  net.zero_grad();
  ForwardTrace<double> trace;
  const Tensor<double> out = net.forward(input, &trace);
  const Tensor<double> input_grad = net.backward(trace, loss.grad(out), options.check_input);
  const Pattern base = pattern_of(net, trace);

  // Loss at a perturbed point; flags a kink when the pattern moved.
  ForwardTrace<double> probe_trace;
  bool kink = false;
  auto probe = [&](const Tensor<double>& x) {
    if (!options.skip_kinks) return loss.value(net.forward(x));
    const double v = loss.value(net.forward(x, &probe_trace));
    if (!(pattern_of(net, probe_trace) == base)) kink = true;
    return v;
  };

  GradCheckResult result;
  const double eps = options.epsilon;
  auto consider = [&](double analytic, double numeric, const std::string& where) {
    if (kink) {
      ++result.kinks;
      kink = false;
      return;
    }
    const double e = relative_error(analytic * options.analytic_scale, numeric);
    if (result.checked++ == 0 || e > result.max_relative_error) {
      result.max_relative_error = e;
      result.worst = where;
      result.worst_analytic = analytic;
      result.worst_numeric = numeric;
    }
  };

  auto& layers = net.layers();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    auto& p = layers[k].params;
    if (p.empty()) continue;
    const std::string name = "layer " + std::to_string(k) + " (" + std::string(layer_kind_name(layers[k].kind)) + ")";
    struct Part {
      Tensor<double>* values;
      const Tensor<double>* grads;
      const char* label;
    };
    for (Part part : {Part{&p.weights, &p.weight_grads, "weight"}, Part{&p.biases, &p.bias_grads, "bias"}}) {
      for (std::size_t i = 0; i < part.values->size(); ++i) {
        double& w = (*part.values)[i];
        const double saved = w;
        w = saved + eps;
        const double up = probe(input);
        w = saved - eps;
        const double down = probe(input);
        w = saved;
        consider((*part.grads)[i], (up - down) / (2 * eps), name + " " + part.label + " " + std::to_string(i));
      }
    }
  }

  if (options.check_input) {
    Tensor<double> x = input;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double saved = x[i];
      x[i] = saved + eps;
      const double up = probe(x);
      x[i] = saved - eps;
      const double down = probe(x);
      x[i] = saved;
      consider(input_grad[i], (up - down) / (2 * eps), "input " + std::to_string(i));
    }
  }
  net.zero_grad();
  return result;
}

}  // namespace tsf
