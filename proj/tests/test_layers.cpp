#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "layer_oracles.hpp"
#include "test_util.hpp"
#include "tsf/errors.hpp"
#include "tsf/layers.hpp"
#include "tsf/sgd.hpp"

using namespace tsf;
using tsf::testing::conv_oracle;
using tsf::testing::random_tensor;

namespace {

double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double rel_err(double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8}); }

}  // namespace

TEST(Conv3x3, SinglePixelCenterTap) {
  Tensor<double> in({1, 1, 1}, 5.0);
  Tensor<double> w({3, 3, 1, 1});
  w[4] = 2.0;
  LayerParams<double> p(w, Tensor<double>({1}, 1.0));
  auto out = conv3x3_forward(in, p);
  ASSERT_EQ(out.dims(), (Dims{1, 1, 1}));
  EXPECT_DOUBLE_EQ(out[0], 11.0);
}

TEST(Conv3x3, ZeroInputGivesBias) {
  std::mt19937_64 rng(1);
  LayerParams<double> p(random_tensor({3, 3, 2, 3}, rng), Tensor<double>({3}, std::vector<double>{0.5, -1.0, 2.0}));
  auto out = conv3x3_forward(Tensor<double>({4, 4, 2}), p);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(out.at(i, j, c), p.biases[c]);
}

TEST(Conv3x3, MatchesDirectOracle) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    auto in = random_tensor({5, 5, 3}, rng);
    LayerParams<double> p(random_tensor({3, 3, 3, 4}, rng), random_tensor({4}, rng));
    EXPECT_LE(max_abs_diff(conv3x3_forward(in, p), conv_oracle(in, p.weights, p.biases)), 1e-12);
  }
}

TEST(Conv3x3, ShapeErrorNamesBothDims) {
  LayerParams<double> p(Tensor<double>({3, 3, 2, 4}), Tensor<double>({4}));
  try {
    conv3x3_forward(Tensor<double>({5, 5, 3}), p);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("3x3x2x4"), std::string::npos) << msg;
    EXPECT_NE(msg.find("5x5x3"), std::string::npos) << msg;
  }
  EXPECT_THROW(conv3x3_forward(Tensor<double>({5, 5}), p), ShapeError);
}

TEST(Conv3x3Backward, ZeroUpstreamGivesZeroGradients) {
  std::mt19937_64 rng(3);
  auto in = random_tensor({4, 4, 2}, rng);
  LayerParams<double> p(random_tensor({3, 3, 2, 3}, rng), random_tensor({3}, rng));
  auto gx = conv3x3_backward(in, p, Tensor<double>({4, 4, 3}));
  for (double v : gx.data()) EXPECT_EQ(v, 0.0);
  for (double v : p.weight_grads.data()) EXPECT_EQ(v, 0.0);
  for (double v : p.bias_grads.data()) EXPECT_EQ(v, 0.0);
}

TEST(Conv3x3Backward, OneHotUpstreamWeightGradient) {
  Tensor<double> in({3, 3, 1}, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9});
  LayerParams<double> p(Tensor<double>({3, 3, 1, 1}), Tensor<double>({1}));
  Tensor<double> up({3, 3, 1});
  up.at(0, 0, 0) = 1.0;  // top-left output: the window hangs off the top and left edges
  conv3x3_backward(in, p, up);
  const double expected[9] = {0, 0, 0, 0, 1, 2, 0, 4, 5};
  for (int k = 0; k < 9; ++k) EXPECT_DOUBLE_EQ(p.weight_grads[k], expected[k]) << k;
  EXPECT_DOUBLE_EQ(p.bias_grads[0], 1.0);
}

TEST(Conv3x3Backward, MatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  auto in = random_tensor({4, 5, 2}, rng);
  LayerParams<double> p(random_tensor({3, 3, 2, 3}, rng), random_tensor({3}, rng));
  auto probe = random_tensor({4, 5, 3}, rng);
  auto loss = [&](const Tensor<double>& x, const LayerParams<double>& q) {
    auto y = conv3x3_forward(x, q);
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += probe[i] * y[i];
    return s;
  };
  auto gx = conv3x3_backward(in, p, probe);
  ASSERT_EQ(gx.dims(), in.dims());
  const double eps = 1e-5;
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    auto q = p;
    q.weights[i] += eps;
    const double up = loss(in, q);
    q.weights[i] -= 2 * eps;
    EXPECT_LT(rel_err(p.weight_grads[i], (up - loss(in, q)) / (2 * eps)), 1e-4) << "weight " << i;
  }
  for (std::size_t i = 0; i < p.biases.size(); ++i) {
    auto q = p;
    q.biases[i] += eps;
    const double up = loss(in, q);
    q.biases[i] -= 2 * eps;
    EXPECT_LT(rel_err(p.bias_grads[i], (up - loss(in, q)) / (2 * eps)), 1e-4) << "bias " << i;
  }
  for (std::size_t i = 0; i < in.size(); ++i) {
    auto x = in;
    x[i] += eps;
    const double up = loss(x, p);
    x[i] -= 2 * eps;
    EXPECT_LT(rel_err(gx[i], (up - loss(x, p)) / (2 * eps)), 1e-4) << "input " << i;
  }
}

TEST(Conv3x3Backward, UpstreamDimsMismatch) {
  LayerParams<double> p(Tensor<double>({3, 3, 1, 2}), Tensor<double>({2}));
  EXPECT_THROW(conv3x3_backward(Tensor<double>({4, 4, 1}), p, Tensor<double>({4, 4, 1})), ShapeError);
}

TEST(MaxPool, TwoByTwo) {
  Tensor<double> in({2, 2, 1}, std::vector<double>{1, 2, 3, 4});
  auto r = maxpool2x2(in);
  ASSERT_EQ(r.output.dims(), (Dims{1, 1, 1}));
  EXPECT_EQ(r.output[0], 4.0);
  EXPECT_EQ(r.argmax[0], 3u);  // row 1, column 1
}

TEST(MaxPool, ConstantInputRoutesToFirstElement) {
  Tensor<double> in({4, 4, 1}, 2.5);
  auto r = maxpool2x2(in);
  for (double v : r.output.data()) EXPECT_EQ(v, 2.5);
  auto gx = maxpool2x2_backward(Tensor<double>({2, 2, 1}, 1.0), r.argmax, in.dims());
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(gx.at(i, j, 0), (i % 2 == 0 && j % 2 == 0) ? 1.0 : 0.0);
}

TEST(MaxPool, MatchesWindowedMaxOracle) {
  std::mt19937_64 rng(5);
  auto in = random_tensor({6, 6, 2}, rng);
  auto r = maxpool2x2(in);
  ASSERT_EQ(r.output.dims(), (Dims{3, 3, 2}));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t c = 0; c < 2; ++c) {
        double m = -1e300;
        for (std::size_t a = 0; a < 2; ++a)
          for (std::size_t b = 0; b < 2; ++b) m = std::max(m, in.at(2 * i + a, 2 * j + b, c));
        EXPECT_EQ(r.output.at(i, j, c), m);
      }
}

TEST(MaxPool, OddDimsDropTrailing) {
  auto r = maxpool2x2(Tensor<double>({5, 7, 1}, 1.0));
  EXPECT_EQ(r.output.dims(), (Dims{2, 3, 1}));
  EXPECT_THROW(maxpool2x2(Tensor<double>({1, 4, 1})), ShapeError);
  EXPECT_THROW(maxpool2x2(Tensor<double>({4, 1, 1})), ShapeError);
}

TEST(Dense, IdentityAndBias) {
  Tensor<double> w({3, 3});
  for (int i = 0; i < 3; ++i) w[i * 3 + i] = 1.0;
  LayerParams<double> p(w, Tensor<double>({3}));
  Tensor<double> x({3}, std::vector<double>{1.5, -2.0, 3.0});
  EXPECT_EQ(dense_forward(x, p), x);

  LayerParams<double> q(w, Tensor<double>({3}, std::vector<double>{1, 2, 3}));
  EXPECT_EQ(dense_forward(Tensor<double>({3}), q).values(), (std::vector<double>{1, 2, 3}));
}

TEST(Dense, MatchesDotProductOracle) {
  std::mt19937_64 rng(8);
  auto x = random_tensor({8}, rng);
  LayerParams<double> p(random_tensor({8, 4}, rng), random_tensor({4}, rng));
  auto y = dense_forward(x, p);
  for (std::size_t o = 0; o < 4; ++o) {
    double s = p.biases[o];
    for (std::size_t i = 0; i < 8; ++i) s += p.weights[i * 4 + o] * x[i];
    EXPECT_EQ(y[o], s);
  }
}

TEST(Dense, LengthMismatch) {
  LayerParams<double> p(Tensor<double>({8, 4}), Tensor<double>({4}));
  EXPECT_THROW(dense_forward(Tensor<double>({7}), p), ShapeError);
}

TEST(Relu, ForwardAndKink) {
  Tensor<double> x({3}, std::vector<double>{-1, 0, 2});
  EXPECT_EQ(relu(x).values(), (std::vector<double>{0, 0, 2}));
  Tensor<double> pos({2}, std::vector<double>{0.5, 3});
  EXPECT_EQ(relu(pos), pos);
  auto g = relu_backward(x, Tensor<double>({3}, 1.0));
  EXPECT_EQ(g.values(), (std::vector<double>{0, 0, 1}));
}

TEST(Softmax, UniformLogits) {
  std::vector<double> z(6, 0.0);
  auto s = softmax<double>(z);
  for (double v : s.values) EXPECT_NEAR(v, 1.0 / 6, 1e-15);
}

TEST(Softmax, ShiftInvarianceAndKnownValue) {
  std::vector<double> z{std::log(2.0), 0.0};
  auto s = softmax<double>(z);
  EXPECT_NEAR(s[0], 2.0 / 3, 1e-15);
  EXPECT_NEAR(s[1], 1.0 / 3, 1e-15);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> a(6), b(6);
    const double shift = u(rng) * 100;
    for (int j = 0; j < 6; ++j) {
      a[j] = u(rng);
      b[j] = a[j] + shift;
    }
    auto sa = softmax<double>(a), sb = softmax<double>(b);
    EXPECT_NEAR(sa.sum(), 1.0, 1e-12);
    EXPECT_EQ(sa.argmax(), argmax_lowest(a));
    for (int j = 0; j < 6; ++j) {
      EXPECT_GT(sa[j], 0.0);
      EXPECT_NEAR(sa[j], sb[j], 1e-12);
    }
  }
}

TEST(Softmax, RejectsNonFinite) {
  std::vector<double> z{0.0, std::nan("")};
  EXPECT_THROW(softmax<double>(z), NumericError);
  std::vector<double> inf{0.0, INFINITY};
  EXPECT_THROW(softmax<double>(inf), NumericError);
}

TEST(CrossEntropy, OneHotAndUniform) {
  ScoreVector onehot(std::vector<double>{0, 1, 0});
  EXPECT_EQ(cross_entropy_loss(onehot, 1), 0.0);
  for (double g : softmax_cross_entropy_grad(onehot, 1)) EXPECT_EQ(g, 0.0);
  EXPECT_NEAR(cross_entropy_loss(ScoreVector::uniform(6), 2), std::log(6.0), 1e-15);
  EXPECT_NEAR(cross_entropy_loss(ScoreVector::uniform(6), 2), 1.7918, 1e-4);
  // Zero probability is floored rather than producing infinity.
  EXPECT_NEAR(cross_entropy_loss(onehot, 0), -std::log(kLossFloor), 1e-9);
}

TEST(CrossEntropy, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int t = 0; t < 10; ++t) {
    std::vector<double> z(6);
    for (auto& v : z) v = u(rng);
    const std::size_t label = static_cast<std::size_t>(t % 6);
    auto g = softmax_cross_entropy_grad(softmax<double>(z), label);
    for (int j = 0; j < 6; ++j) {
      auto zp = z, zm = z;
      zp[j] += 1e-5;
      zm[j] -= 1e-5;
      const double num = (cross_entropy_loss(softmax<double>(zp), label) -
                          cross_entropy_loss(softmax<double>(zm), label)) / 2e-5;
      EXPECT_LT(rel_err(g[j], num), 1e-4);
    }
  }
}

TEST(CrossEntropy, LabelOutOfRange) {
  EXPECT_THROW(cross_entropy_loss(ScoreVector::uniform(3), 3), DataError);
}

TEST(Sgd, ZeroGradientLeavesParameters) {
  std::mt19937_64 rng(4);
  LayerParams<double> p(random_tensor({4, 2}, rng), random_tensor({2}, rng));
  const auto before = p;
  SgdOptimizer<double> opt({0.1, 0.0, 0.0, 1});
  LayerParams<double>* ps[] = {&p};
  opt.step(ps);
  EXPECT_EQ(p.weights, before.weights);
  EXPECT_EQ(p.biases, before.biases);
}

TEST(Sgd, UnitLearningRateSubtractsGradient) {
  LayerParams<double> p(Tensor<double>({2}, std::vector<double>{1.0, 2.0}), Tensor<double>({1}, 0.5));
  p.weight_grads = Tensor<double>({2}, std::vector<double>{0.25, -0.75});
  p.bias_grads = Tensor<double>({1}, 0.125);
  SgdOptimizer<double> opt({1.0, 0.0, 0.0, 1});
  LayerParams<double>* ps[] = {&p};
  opt.step(ps);
  EXPECT_EQ(p.weights.values(), (std::vector<double>{0.75, 2.75}));
  EXPECT_EQ(p.biases[0], 0.375);
  EXPECT_EQ(p.weight_grads.values(), (std::vector<double>{0, 0}));
}

TEST(Sgd, TwoMomentumStepsMatchUnrolledRecursion) {
  const double lr = 0.1, mu = 0.9, wd = 0.01;
  const double w0 = 1.0, g1 = 0.5, g2 = -0.3;
  // v1 = -lr (g1 + wd w0); w1 = w0 + v1; v2 = mu v1 - lr (g2 + wd w1); w2 = w1 + v2
  const double v1 = -lr * (g1 + wd * w0);
  const double w1 = w0 + v1;
  const double v2 = mu * v1 - lr * (g2 + wd * w1);
  const double w2 = w1 + v2;

  LayerParams<double> p(Tensor<double>({1}, w0), Tensor<double>({1}, 0.0));
  SgdOptimizer<double> opt({lr, mu, wd, 1});
  LayerParams<double>* ps[] = {&p};
  p.weight_grads[0] = g1;
  opt.step(ps);
  EXPECT_DOUBLE_EQ(p.weights[0], w1);
  p.weight_grads[0] = g2;
  opt.step(ps);
  EXPECT_DOUBLE_EQ(p.weights[0], w2);
}

TEST(SgdConfig, Validation) {
  EXPECT_THROW((SgdConfig{0.01, 1.0, 0.0, 1}.validate()), InputError);
  EXPECT_THROW((SgdConfig{-0.01, 0.5, 0.0, 1}.validate()), InputError);
  EXPECT_THROW((SgdConfig{0.01, 0.5, -1.0, 1}.validate()), InputError);
  EXPECT_THROW((SgdConfig{0.0, 0.5, 0.0, 1}.validate_strict()), InputError);
  EXPECT_NO_THROW((SgdConfig{0.01, 0.9, 5e-4, 1}.validate_strict()));
}
