#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tsf/dataset.hpp"
#include "tsf/flow_stack.hpp"
#include "tsf/network.hpp"
#include "tsf/scores.hpp"
#include "tsf/sgd.hpp"

namespace tsf {

// spatial: one RGB frame. temporal: 2L flow channels. early: frame and flow
// channels stacked into one 3 + 2L input.
enum class StreamKind { spatial, temporal, early };

std::string stream_kind_name(StreamKind kind);
StreamKind parse_stream_kind(const std::string& name);

struct StreamConfig {
  StreamKind kind = StreamKind::spatial;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t channels = 3;
  int flow_length = 10;  // L; fixes the usable frame range for every kind
  std::vector<std::pair<int, int>> blocks{{1, 8}, {1, 16}, {2, 32}};  // (conv count, out channels)
  std::vector<std::size_t> fc_dims{128, 6};  // hidden widths..., feature_dim, n_classes
  double flow_clip = 8.0;

  static std::size_t channels_for(StreamKind kind, int flow_length);
  static StreamConfig desk(StreamKind kind, int flow_length = 10, std::size_t height = 64, std::size_t width = 64);
  // 13 conv / 5 pool / 3 dense on 224 x 224 inputs.
  static StreamConfig full(StreamKind kind, int flow_length = 10);

  std::size_t n_classes() const { return fc_dims.back(); }
  std::size_t feature_dim() const { return fc_dims.at(fc_dims.size() - 2); }
  Dims input_dims() const { return {height, width, channels}; }

  // Throws InputError on inconsistent fields and ShapeError on a shape chain
  // that collapses.
  void validate() const;

  std::string to_text() const;
  static StreamConfig from_text(const std::string& text);
  bool operator==(const StreamConfig&) const = default;
};

struct LayerPlan {
  LayerKind kind;
  Dims input;
  Dims output;
  std::size_t parameters = 0;
};

// Layer-by-layer shapes without allocating weights. Throws ShapeError naming
// the first layer whose input cannot be processed.
std::vector<LayerPlan> plan_stream(const StreamConfig& config);

struct StreamModel {
  StreamConfig config;
  Network<float> net;
  // Per-channel mean subtracted from RGB frame channels (empty until trained).
  std::vector<float> frame_mean;
};

StreamModel build_stream(const StreamConfig& config, std::uint64_t seed);

// A clip with its full flow sequence (tau = 0, L = T - 1) if the stream needs flow.
struct ClipData {
  std::string name;
  VideoClip clip;
  std::optional<FlowStack> flows;
};

// Highest usable start frame: T - L - 1.
int max_tau(const StreamConfig& config, int num_frames);
// m uniformly spaced start frames round(i * max_tau / (m - 1)); m = 1 gives
// the middle frame.
std::vector<int> sample_taus(const StreamConfig& config, int num_frames, int m);

// Network input for one (clip, tau) sample.
Tensor<float> stream_input(const StreamModel& model, const ClipData& data, int tau);

struct TrainHyper {
  SgdConfig sgd;
  int batch_size = 16;
  int epochs = 15;
  int frames_per_clip_per_epoch = 2;
  std::optional<int> fixed_tau;  // every sample uses this start frame

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double train_accuracy = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  std::string to_csv() const;
};

// Per-channel mean of the RGB frames of `clips` (used for spatial and early
// inputs).
std::vector<float> frame_channel_mean(std::span<const ClipData> clips);

// Mini-batch SGD on random (clip, tau) samples; deterministic given
// hyper.sgd.seed. Sets model.frame_mean from the training clips when empty.
// Throws DataError for clips lacking required flow and DivergenceError on a
// non-finite loss.
TrainHistory train_stream(StreamModel& model, std::span<const ClipData> clips, const TrainHyper& hyper);

// flow_dir/<clip file stem>.tsfs
std::filesystem::path flow_path_for(const std::filesystem::path& flow_dir, const std::string& clip_path);

// Loads clips of one split; flows from flow_dir/<clip stem>.tsfs when
// need_flows.
std::vector<ClipData> load_clip_data(const DatasetManifest& manifest, Split split,
                                     const std::filesystem::path& flow_dir, bool need_flows, int jobs = 1);

std::vector<double> predict_logits(const StreamModel& model, const Tensor<float>& input);
ScoreVector predict_frame(const StreamModel& model, const Tensor<float>& input);
// Post-ReLU activations of the penultimate dense layer.
std::vector<float> extract_feature(const StreamModel& model, const Tensor<float>& input);
// Mean of per-sample softmax scores over sample_taus(m).
ScoreVector predict_video(const StreamModel& model, const ClipData& data, int m = 5);
ScoreVector mean_scores(std::span<const ScoreVector> scores);

// Text header (key = value StreamConfig, frame mean) followed by the binary
// network checkpoint.
std::vector<std::uint8_t> encode_stream(const StreamModel& model);
StreamModel decode_stream(std::span<const std::uint8_t> bytes);
void save_stream(const StreamModel& model, const std::filesystem::path& path);
StreamModel load_stream(const std::filesystem::path& path);

}  // namespace tsf
