#include "tsf/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tsf/binary_io.hpp"
#include "tsf/errors.hpp"

namespace tsf {

namespace {

constexpr char kSvmMagic[] = "TSSV";
constexpr std::uint32_t kSvmVersion = 1;

template <typename T>
FusedFeature interleave(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) {
    throw ShapeError("feature lengths differ: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  FusedFeature f;
  f.values.resize(2 * a.size());
  for (std::size_t d = 0; d < a.size(); ++d) {
    f.values[2 * d] = static_cast<double>(a[d]);
    f.values[2 * d + 1] = static_cast<double>(b[d]);
  }
  return f;
}

double dot(const float* w, const std::vector<double>& x) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += static_cast<double>(w[k]) * x[k];
  return s;
}

}  // namespace

Tensor<float> assemble_early_input(const Tensor<float>& frame, const Tensor<float>& flow) {
  if (frame.rank() != 3 || frame.dim(2) != 3) throw ShapeError("early input frame must be H x W x 3");
  if (flow.rank() != 3 || flow.dim(2) % 2 != 0 || flow.dim(2) == 0) {
    throw ShapeError("early input flow must be H x W x 2L");
  }
  if (frame.dim(0) != flow.dim(0) || frame.dim(1) != flow.dim(1)) {
    throw ShapeError("frame " + format_dims(frame.dims()) + " and flow " + format_dims(flow.dims()) +
                     " differ in height/width");
  }
  const std::size_t n = frame.dim(0) * frame.dim(1), cf = flow.dim(2), co = 3 + cf;
  Tensor<float> out({frame.dim(0), frame.dim(1), co});
  for (std::size_t p = 0; p < n; ++p) {
    std::copy_n(frame.raw() + 3 * p, 3, out.raw() + co * p);
    std::copy_n(flow.raw() + cf * p, cf, out.raw() + co * p + 3);
  }
  return out;
}

FusedFeature interleave_features(std::span<const float> spatial, std::span<const float> temporal) {
  return interleave(spatial, temporal);
}

FusedFeature interleave_features(std::span<const double> spatial, std::span<const double> temporal) {
  return interleave(spatial, temporal);
}

std::pair<std::vector<double>, std::vector<double>> deinterleave_features(const FusedFeature& f) {
  if (f.values.size() % 2 != 0) throw ShapeError("fused feature length must be even");
  std::pair<std::vector<double>, std::vector<double>> out;
  for (std::size_t d = 0; d < f.values.size(); d += 2) {
    out.first.push_back(f.values[d]);
    out.second.push_back(f.values[d + 1]);
  }
  return out;
}

FusedFeature l2_normalize(FusedFeature f) {
  double sq = 0.0;
  for (double x : f.values) sq += x * x;
  const double norm = std::sqrt(sq);
  if (norm < 1e-12) {
    f.normalized = false;
    return f;
  }
  for (double& x : f.values) x /= norm;
  f.normalized = true;
  return f;
}

void SvmHyper::validate() const {
  if (!(C > 0.0) || !std::isfinite(C)) throw InputError("svm C must be a positive finite number");
  if (epochs < 1) throw InputError("svm epochs must be >= 1");
}

SvmModel train_linear_svm(std::span<const FusedFeature> features, std::span<const int> labels, std::size_t n_classes,
                          const SvmHyper& hyper) {
  hyper.validate();
  if (features.size() != labels.size()) throw ShapeError("svm: feature and label counts differ");
  if (features.empty()) throw TrainingError("svm: no training data");
  const std::size_t N = features.size(), D = features[0].values.size();
  std::vector<int> seen(n_classes, 0);
  for (std::size_t i = 0; i < N; ++i) {
    if (features[i].values.size() != D) throw ShapeError("svm: feature " + std::to_string(i) + " has a different length");
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= n_classes) {
      throw DataError("svm: label " + std::to_string(labels[i]) + " out of range at position " + std::to_string(i));
    }
    seen[static_cast<std::size_t>(labels[i])] = 1;
  }
  if (std::count(seen.begin(), seen.end(), 1) < 2) throw TrainingError("svm: need at least two classes");

  const double lambda = 1.0 / hyper.C, radius = 1.0 / std::sqrt(lambda), inv_n = 1.0 / static_cast<double>(N);
  SvmModel model;
  model.n_classes = n_classes;
  model.dim = D;
  model.hyper = hyper;
  model.weights.assign(n_classes * D, 0.0f);
  model.biases.assign(n_classes, 0.0f);
  model.objective.assign(static_cast<std::size_t>(hyper.epochs), 0.0);

  std::vector<double> grad(D);
  for (std::size_t c = 0; c < n_classes; ++c) {
    std::vector<double> w(D, 0.0);
    double b = 0.0;
    auto objective = [&] {
      double hinge = 0.0, sq = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        const double y = labels[i] == static_cast<int>(c) ? 1.0 : -1.0;
        double m = b;
        for (std::size_t k = 0; k < D; ++k) m += w[k] * features[i].values[k];
        hinge += std::max(0.0, 1.0 - y * m);
      }
      for (double x : w) sq += x * x;
      return 0.5 * lambda * sq + hinge * inv_n;
    };
    for (int t = 1; t <= hyper.epochs; ++t) {
      std::fill(grad.begin(), grad.end(), 0.0);
      double grad_b = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        const double y = labels[i] == static_cast<int>(c) ? 1.0 : -1.0;
        const auto& x = features[i].values;
        double m = b;
        for (std::size_t k = 0; k < D; ++k) m += w[k] * x[k];
        if (y * m < 1.0) {
          for (std::size_t k = 0; k < D; ++k) grad[k] -= y * x[k];
          grad_b -= y;
        }
      }
      const double eta = 1.0 / (lambda * t);
      double sq = 0.0;
      for (std::size_t k = 0; k < D; ++k) {
        w[k] -= eta * (lambda * w[k] + grad[k] * inv_n);
        sq += w[k] * w[k];
      }
      b -= eta * grad_b * inv_n;
      if (sq > radius * radius) {
        const double s = radius / std::sqrt(sq);
        for (double& x : w) x *= s;
      }
      model.objective[static_cast<std::size_t>(t - 1)] += objective() / static_cast<double>(n_classes);
    }
    for (std::size_t k = 0; k < D; ++k) model.weights[c * D + k] = static_cast<float>(w[k]);
    model.biases[c] = static_cast<float>(b);
  }
  return model;
}

SvmPrediction svm_predict(const SvmModel& model, const FusedFeature& f) {
  if (f.values.size() != model.dim) {
    throw ShapeError("svm expects features of length " + std::to_string(model.dim) + ", got " +
                     std::to_string(f.values.size()));
  }
  SvmPrediction p;
  p.margins.resize(model.n_classes);
  for (std::size_t c = 0; c < model.n_classes; ++c) {
    p.margins[c] = dot(model.weights.data() + c * model.dim, f.values) + static_cast<double>(model.biases[c]);
  }
  p.label = static_cast<int>(argmax_lowest(p.margins));
  return p;
}

std::vector<std::uint8_t> encode_svm(const SvmModel& model) {
  io::ByteWriter w;
  w.magic(kSvmMagic);
  w.u32(kSvmVersion);
  w.u32(static_cast<std::uint32_t>(model.n_classes));
  w.u32(static_cast<std::uint32_t>(model.dim));
  w.f32s(model.weights);
  w.f32s(model.biases);
  return w.take();
}

SvmModel decode_svm(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  r.expect_magic(kSvmMagic, "svm");
  const std::size_t version_at = r.offset();
  if (r.u32() != kSvmVersion) throw FormatError("unsupported svm version", version_at);
  const std::size_t dims_at = r.offset();
  SvmModel m;
  m.n_classes = r.u32();
  m.dim = r.u32();
  if (m.n_classes < 2 || m.dim < 1) throw FormatError("invalid svm dims", dims_at);
  const std::size_t expect = 4 * (m.n_classes * m.dim + m.n_classes);
  if (r.remaining() != expect) {
    throw FormatError("svm payload is " + std::to_string(r.remaining()) + " bytes, expected " + std::to_string(expect),
                      r.offset());
  }
  m.weights.resize(m.n_classes * m.dim);
  m.biases.resize(m.n_classes);
  r.f32s(m.weights);
  r.f32s(m.biases);
  r.expect_end("svm");
  return m;
}

void save_svm(const SvmModel& model, const std::filesystem::path& path) { io::write_file(path, encode_svm(model)); }

SvmModel load_svm(const std::filesystem::path& path) { return decode_svm(io::read_file(path)); }

ClassPriors estimate_priors(std::span<const int> labels, std::size_t n_classes) {
  if (labels.empty()) throw DataError("cannot estimate class priors from no labels");
  ClassPriors pr;
  pr.p.assign(n_classes, kPriorSmoothing);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= n_classes) {
      throw DataError("label " + std::to_string(labels[i]) + " out of range at position " + std::to_string(i));
    }
    pr.p[static_cast<std::size_t>(labels[i])] += 1.0;
  }
  double total = 0.0;
  for (double x : pr.p) total += x;
  for (double& x : pr.p) x /= total;
  return pr;
}

ScoreVector late_fuse(const ScoreVector& spatial, const ScoreVector& temporal, const ClassPriors& priors) {
  const std::size_t n = spatial.size();
  if (temporal.size() != n || priors.p.size() != n) {
    throw InputError("late fusion needs equal lengths, got " + std::to_string(n) + ", " +
                     std::to_string(temporal.size()) + ", " + std::to_string(priors.p.size()));
  }
  std::vector<double> s(n);
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (!(priors.p[j] > 0.0)) throw InputError("class prior " + std::to_string(j) + " is not positive");
    s[j] = spatial[j] * temporal[j] / priors.p[j];
    total += s[j];
  }
  if (!(total > 0.0) || !std::isfinite(total)) throw InputError("late fusion is degenerate: all score products are zero");
  for (double& x : s) x /= total;
  return ScoreVector(std::move(s));
}

int majority_vote(std::span<const int> labels, std::size_t n_classes) {
  if (labels.empty()) throw DataError("majority vote over no labels");
  std::vector<int> counts(n_classes, 0);
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= n_classes) throw DataError("vote label out of range");
    ++counts[static_cast<std::size_t>(l)];
  }
  return static_cast<int>(argmax_lowest(counts));
}

std::string fused_features_csv(std::span<const FusedFeature> features, std::span<const int> labels) {
  if (features.size() != labels.size()) throw ShapeError("feature and label counts differ");
  std::ostringstream os;
  os.precision(9);
  for (std::size_t i = 0; i < features.size(); ++i) {
    os << labels[i];
    for (double x : features[i].values) os << ',' << x;
    os << '\n';
  }
  return os.str();
}

}  // namespace tsf
