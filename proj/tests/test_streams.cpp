#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "test_util.hpp"
#include "tsf/errors.hpp"
#include "tsf/streams.hpp"

using namespace tsf;
using tsf::testing::TempDir;

namespace {

constexpr int kFrames = 10;
constexpr int kFlowLength = 3;

// Small clip with a hand-made flow sequence: oscillating classes get a
// horizontal patch motion, stationary classes none.
ClipData small_clip(int label, std::uint64_t seed, bool with_flows) {
  ClipData d;
  d.name = "c" + std::to_string(label) + "_" + std::to_string(seed);
  d.clip = generate_clip({label, seed, kFrames, 32, 32, 0.02});
  if (with_flows) {
    std::vector<FlowField> flows;
    for (int k = 0; k + 1 < kFrames; ++k) {
      FlowField f(32, 32);
      const double u = label % 2 ? 3.0 * std::sin(0.7 * k + static_cast<double>(seed)) : 0.0;
      for (std::size_t i = 10; i < 22; ++i)
        for (std::size_t j = 8; j < 24; ++j) f.u(i, j) = u;
      flows.push_back(std::move(f));
    }
    d.flows = build_flow_stack(flows, 0);
  }
  return d;
}

StreamConfig small_config(StreamKind kind) { return StreamConfig::desk(kind, kFlowLength, 32, 32); }

std::size_t count_kind(const std::vector<LayerPlan>& plan, LayerKind kind) {
  return static_cast<std::size_t>(std::count_if(plan.begin(), plan.end(), [&](const LayerPlan& l) { return l.kind == kind; }));
}

Tensor<float> random_input(const StreamConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return tsf::testing::random_tensor<float>(cfg.input_dims(), rng);
}

}  // namespace

TEST(StreamPlan, FullPresetHasThirteenConvFivePoolThreeDense) {
  const auto plan = plan_stream(StreamConfig::full(StreamKind::spatial));
  EXPECT_EQ(count_kind(plan, LayerKind::conv3x3), 13u);
  EXPECT_EQ(count_kind(plan, LayerKind::maxpool2x2), 5u);
  EXPECT_EQ(count_kind(plan, LayerKind::dense), 3u);
  EXPECT_EQ(plan.front().input, (Dims{224, 224, 3}));
  EXPECT_EQ(plan.back().output, (Dims{6}));
  EXPECT_EQ(StreamConfig::full(StreamKind::spatial).feature_dim(), 4096u);
}

TEST(StreamPlan, TemporalTwinDiffersOnlyInInputChannels) {
  const auto sp = plan_stream(StreamConfig::full(StreamKind::spatial));
  const auto tp = plan_stream(StreamConfig::full(StreamKind::temporal, 10));
  ASSERT_EQ(sp.size(), tp.size());
  EXPECT_EQ(tp.front().input, (Dims{224, 224, 20}));
  for (std::size_t i = 0; i < sp.size(); ++i) {
    EXPECT_EQ(sp[i].kind, tp[i].kind) << i;
    EXPECT_EQ(sp[i].output, tp[i].output) << i;
    if (i > 0) {
      EXPECT_EQ(sp[i].parameters, tp[i].parameters) << i;
    }
  }
  // Desk models built for both kinds agree the same way.
  const auto a = build_stream(small_config(StreamKind::spatial), 1);
  const auto b = build_stream(small_config(StreamKind::temporal), 1);
  ASSERT_EQ(a.net.size(), b.net.size());
  for (std::size_t i = 0; i < a.net.size(); ++i) EXPECT_EQ(a.net.layers()[i].kind, b.net.layers()[i].kind);
}

TEST(StreamPlan, CollapsingChainNamesTheLayer) {
  auto cfg = StreamConfig::desk(StreamKind::spatial, 10, 4, 4);
  try {
    plan_stream(cfg);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("layer "), std::string::npos) << e.what();
  }
  EXPECT_THROW(build_stream(cfg, 1), ShapeError);
}

TEST(StreamPlan, ChannelRuleAndValidation) {
  EXPECT_EQ(StreamConfig::channels_for(StreamKind::spatial, 10), 3u);
  EXPECT_EQ(StreamConfig::channels_for(StreamKind::temporal, 10), 20u);
  EXPECT_EQ(StreamConfig::channels_for(StreamKind::early, 1), 5u);
  EXPECT_EQ(StreamConfig::channels_for(StreamKind::early, 10), 23u);
  auto cfg = StreamConfig::desk(StreamKind::temporal);
  cfg.channels = 3;
  EXPECT_THROW(cfg.validate(), InputError);
  EXPECT_THROW(parse_stream_kind("sideways"), InputError);
  EXPECT_EQ(parse_stream_kind("temporal"), StreamKind::temporal);
}

TEST(StreamConfigText, RoundTrips) {
  auto cfg = StreamConfig::desk(StreamKind::early, 4, 48, 40);
  cfg.flow_clip = 6.5;
  EXPECT_EQ(StreamConfig::from_text(cfg.to_text()), cfg);
  EXPECT_THROW(StreamConfig::from_text("kind = spatial\n"), FormatError);
}

TEST(StreamForward, DeskPresetGivesSixLogits) {
  const auto cfg = StreamConfig::desk(StreamKind::spatial);
  const auto model = build_stream(cfg, 3);
  const auto logits = predict_logits(model, random_input(cfg, 1));
  ASSERT_EQ(logits.size(), 6u);
  for (double x : logits) EXPECT_TRUE(std::isfinite(x));
}

TEST(StreamForward, ZeroedFinalLayerIsUniform) {
  const auto cfg = small_config(StreamKind::spatial);
  auto model = build_stream(cfg, 3);
  auto& last = model.net.layers().back().params;
  for (auto& w : last.weights.data()) w = 0.0f;
  for (auto& b : last.biases.data()) b = 0.0f;
  const auto s = predict_frame(model, random_input(cfg, 2));
  for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(s[j], 1.0 / 6.0, 1e-12);
}

TEST(StreamForward, ScoresSumToOneAndFollowLogits) {
  const auto cfg = small_config(StreamKind::temporal);
  const auto model = build_stream(cfg, 5);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto x = random_input(cfg, seed);
    const auto s = predict_frame(model, x);
    EXPECT_NEAR(s.sum(), 1.0, 1e-6);
    EXPECT_EQ(s.argmax(), argmax_lowest(predict_logits(model, x)));
  }
}

TEST(StreamForward, WrongInputShapeThrows) {
  const auto model = build_stream(small_config(StreamKind::spatial), 1);
  EXPECT_THROW(predict_frame(model, Tensor<float>({32, 32, 4})), ShapeError);
  EXPECT_THROW(extract_feature(model, Tensor<float>({16, 32, 3})), ShapeError);
}

TEST(StreamFeature, LengthNonNegativeAndDeterministic) {
  const auto cfg = small_config(StreamKind::spatial);
  const auto model = build_stream(cfg, 7);
  const auto x = random_input(cfg, 9);
  const Tensor<float> copy = x;
  const auto f = extract_feature(model, x);
  ASSERT_EQ(f.size(), cfg.feature_dim());
  EXPECT_EQ(f.size(), 128u);
  for (float v : f) EXPECT_GE(v, 0.0f);
  EXPECT_EQ(f, extract_feature(model, copy));
}

TEST(StreamSampling, UniformTaus) {
  const auto cfg = StreamConfig::desk(StreamKind::temporal, 10);
  EXPECT_EQ(max_tau(cfg, 30), 19);
  EXPECT_EQ(sample_taus(cfg, 30, 5), (std::vector<int>{0, 5, 10, 14, 19}));
  EXPECT_EQ(sample_taus(cfg, 30, 1), (std::vector<int>{9}));
  EXPECT_THROW(sample_taus(cfg, 10, 5), DataError);
}

TEST(StreamInput, SpatialSubtractsMeanAndTemporalNeedsFlow) {
  auto model = build_stream(small_config(StreamKind::spatial), 1);
  const auto data = small_clip(0, 4, false);
  model.frame_mean = {0.25f, 0.5f, 0.75f};
  const auto x = stream_input(model, data, 2);
  const auto frame = data.clip.frame(2);
  for (std::size_t k = 0; k < x.size(); ++k) EXPECT_FLOAT_EQ(x[k], frame[k] - model.frame_mean[k % 3]);

  const auto tmodel = build_stream(small_config(StreamKind::temporal), 1);
  EXPECT_THROW(stream_input(tmodel, data, 0), DataError);
  const auto with = small_clip(1, 4, true);
  EXPECT_EQ(stream_input(tmodel, with, 0).dims(), (Dims{32, 32, 6}));
  EXPECT_THROW(stream_input(tmodel, with, max_tau(tmodel.config, kFrames) + 1), DataError);

  const auto emodel = build_stream(small_config(StreamKind::early), 1);
  EXPECT_EQ(stream_input(emodel, with, 1).dims(), (Dims{32, 32, 9}));
}

TEST(StreamVideo, MeanOfSamples) {
  std::vector<ScoreVector> s{ScoreVector({0.8, 0.2}), ScoreVector({0.4, 0.6})};
  const auto m = mean_scores(s);
  EXPECT_NEAR(m[0], 0.6, 1e-12);
  EXPECT_NEAR(m[1], 0.4, 1e-12);
  std::vector<ScoreVector> same(4, ScoreVector({0.1, 0.7, 0.2}));
  EXPECT_EQ(mean_scores(same).values, same[0].values);
}

TEST(StreamVideo, SingleSampleEqualsFramePrediction) {
  const auto model = build_stream(small_config(StreamKind::temporal), 2);
  const auto data = small_clip(3, 1, true);
  const int tau = sample_taus(model.config, kFrames, 1)[0];
  const auto v = predict_video(model, data, 1);
  const auto f = predict_frame(model, stream_input(model, data, tau));
  for (std::size_t j = 0; j < 6; ++j) EXPECT_DOUBLE_EQ(v[j], f[j]);
  EXPECT_NEAR(predict_video(model, data, 5).sum(), 1.0, 1e-6);
}

TEST(StreamTraining, ZeroLearningRateLeavesParameters) {
  std::vector<ClipData> clips;
  for (int c = 0; c < 6; ++c) clips.push_back(small_clip(c, 10 + c, false));
  auto model = build_stream(small_config(StreamKind::spatial), 4);
  const auto before = encode_checkpoint(model.net);
  TrainHyper h;
  h.sgd.learning_rate = 0.0;
  h.epochs = 1;
  const auto hist = train_stream(model, clips, h);
  EXPECT_EQ(encode_checkpoint(model.net), before);
  ASSERT_EQ(hist.epochs.size(), 1u);
  EXPECT_TRUE(std::isfinite(hist.epochs[0].loss));
  EXPECT_EQ(hist.to_csv().rfind("epoch,loss,train_accuracy\n", 0), 0u);
}

TEST(StreamTraining, SameSeedsGiveIdenticalCheckpoints) {
  std::vector<ClipData> clips;
  for (int c = 0; c < 6; ++c) clips.push_back(small_clip(c, 20 + c, true));
  TrainHyper h;
  h.epochs = 2;
  h.batch_size = 4;
  auto run = [&] {
    auto model = build_stream(small_config(StreamKind::temporal), 8);
    train_stream(model, clips, h);
    return encode_stream(model);
  };
  const auto a = run();
  EXPECT_EQ(a, run());
  h.sgd.seed += 1;
  EXPECT_NE(a, run());
}

TEST(StreamTraining, LossFallsOnSmallSet) {
  std::vector<ClipData> clips;
  for (int c = 0; c < 6; ++c) clips.push_back(small_clip(c, 30 + c, true));
  auto model = build_stream(small_config(StreamKind::temporal), 2);
  TrainHyper h;
  h.epochs = 20;
  h.batch_size = 4;
  const auto hist = train_stream(model, clips, h);
  EXPECT_LT(hist.epochs.back().loss, hist.epochs.front().loss);
}

TEST(StreamTraining, RejectsBadInputs) {
  std::vector<ClipData> clips{small_clip(0, 1, false)};
  auto model = build_stream(small_config(StreamKind::temporal), 2);
  EXPECT_THROW(train_stream(model, clips, {}), DataError);
  TrainHyper h;
  h.batch_size = 0;
  auto spatial = build_stream(small_config(StreamKind::spatial), 2);
  EXPECT_THROW(train_stream(spatial, clips, h), InputError);
  EXPECT_THROW(train_stream(spatial, std::span<const ClipData>{}, {}), DataError);
}

TEST(StreamTraining, HugeLearningRateDiverges) {
  std::vector<ClipData> clips;
  for (int c = 0; c < 6; ++c) clips.push_back(small_clip(c, 40 + c, false));
  auto model = build_stream(small_config(StreamKind::spatial), 2);
  TrainHyper h;
  h.sgd.learning_rate = 1e12;
  h.epochs = 5;
  h.batch_size = 2;
  try {
    train_stream(model, clips, h);
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("(batch " + std::to_string(e.batch()) + ")"), std::string::npos);
  }
}

TEST(StreamCheckpoint, RoundTripAndCorruption) {
  auto model = build_stream(small_config(StreamKind::early), 6);
  model.frame_mean = {0.1f, 0.2f, 0.3f};
  const auto bytes = encode_stream(model);
  const auto back = decode_stream(bytes);
  EXPECT_EQ(back.config, model.config);
  EXPECT_EQ(back.frame_mean, model.frame_mean);
  EXPECT_EQ(encode_stream(back), bytes);

  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_stream(bad), FormatError);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  EXPECT_THROW(decode_stream(truncated), FormatError);

  TempDir dir("stream");
  save_stream(model, dir / "m.tsst");
  EXPECT_EQ(encode_stream(load_stream(dir / "m.tsst")), bytes);
  EXPECT_THROW(load_stream(dir / "missing.tsst"), DataError);
}
