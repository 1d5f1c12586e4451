#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tsf/scores.hpp"
#include "tsf/tensor.hpp"

namespace tsf {

// Frame channels (H x W x 3) followed by flow channels (H x W x 2L) in
// their stacked order.
Tensor<float> assemble_early_input(const Tensor<float>& frame, const Tensor<float>& flow);

struct FusedFeature {
  std::vector<double> values;
  bool normalized = false;
  bool operator==(const FusedFeature&) const = default;
};

// (a1, a2, ...) and (b1, b2, ...) -> (a1, b1, a2, b2, ...).
FusedFeature interleave_features(std::span<const float> spatial, std::span<const float> temporal);
FusedFeature interleave_features(std::span<const double> spatial, std::span<const double> temporal);
// Inverse of interleave_features: (even positions, odd positions).
std::pair<std::vector<double>, std::vector<double>> deinterleave_features(const FusedFeature& f);

// Unit Euclidean norm. A vector with norm below 1e-12 is returned unchanged
// with normalized = false.
FusedFeature l2_normalize(FusedFeature f);

struct SvmHyper {
  double C = 1.0;
  int epochs = 50;
  std::uint64_t seed = 1;

  void validate() const;
};

// One-vs-rest linear SVM: row c of `weights` and biases[c] score class c.
struct SvmModel {
  std::size_t n_classes = 0;
  std::size_t dim = 0;
  std::vector<float> weights;  // n_classes x dim, row-major
  std::vector<float> biases;
  SvmHyper hyper;
  // Mean over classes of each binary objective, per epoch.
  std::vector<double> objective;

  bool operator==(const SvmModel& o) const {
    return n_classes == o.n_classes && dim == o.dim && weights == o.weights && biases == o.biases;
  }
};

// Minimises, per class c with y = +1 for class c and -1 otherwise,
//   (lambda / 2) |w|^2 + mean_i max(0, 1 - y_i (w . x_i + b)),  lambda = 1 / C,
// by full-batch subgradient steps of size 1 / (lambda t) with the iterate
// kept inside the ball |w| <= 1 / sqrt(lambda). The bias is not regularised.
// Throws TrainingError when fewer than two classes are present.
SvmModel train_linear_svm(std::span<const FusedFeature> features, std::span<const int> labels, std::size_t n_classes,
                          const SvmHyper& hyper = {});

struct SvmPrediction {
  int label = 0;
  std::vector<double> margins;
};

// Argmax margin, ties to the lowest class index.
SvmPrediction svm_predict(const SvmModel& model, const FusedFeature& f);

std::vector<std::uint8_t> encode_svm(const SvmModel& model);
SvmModel decode_svm(std::span<const std::uint8_t> bytes);
void save_svm(const SvmModel& model, const std::filesystem::path& path);
SvmModel load_svm(const std::filesystem::path& path);

inline constexpr double kPriorSmoothing = 1e-6;

struct ClassPriors {
  std::vector<double> p;
};

// p(j) proportional to count(j) + kPriorSmoothing.
ClassPriors estimate_priors(std::span<const int> labels, std::size_t n_classes);

// score_j = (s_st_j s_tp_j / p_j) / sum_k (s_st_k s_tp_k / p_k).
// Throws InputError on length mismatch or an all-zero numerator.
ScoreVector late_fuse(const ScoreVector& spatial, const ScoreVector& temporal, const ClassPriors& priors);

// Most frequent label, ties to the lowest index.
int majority_vote(std::span<const int> labels, std::size_t n_classes);

// One feature per row, label in column 1.
std::string fused_features_csv(std::span<const FusedFeature> features, std::span<const int> labels);

}  // namespace tsf
