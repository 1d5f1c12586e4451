#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "tsf/dataset.hpp"
#include "tsf/flow.hpp"
#include "tsf/fusion.hpp"
#include "tsf/streams.hpp"

namespace tsf {

enum class Strategy { spatial_only, temporal_only, early, mid, late };

inline constexpr std::array<Strategy, 5> kAllStrategies{Strategy::spatial_only, Strategy::temporal_only, Strategy::early,
                                                        Strategy::mid, Strategy::late};

std::string strategy_name(Strategy s);
// Throws UsageError for an unknown name.
Strategy parse_strategy(const std::string& name);

// Streams a strategy needs trained.
std::vector<StreamKind> strategy_streams(Strategy s);

// Everything a run depends on. Text form is line-oriented
// `section.key = value` with '#' comments; unspecified keys keep defaults.
struct RunConfig {
  DatasetConfig dataset;
  FlowParams flow;
  int flow_length = 10;
  std::vector<std::pair<int, int>> blocks{{1, 8}, {1, 16}, {2, 32}};
  std::vector<std::size_t> fc_dims{128, kNumClasses};
  double flow_clip = 8.0;
  TrainHyper train;
  SvmHyper svm;
  int samples_per_video = 5;
  Strategy strategy = Strategy::mid;
  std::filesystem::path out = "tsf_run";
  int jobs = 1;

  StreamConfig stream(StreamKind kind) const;
  // Sets every training seed (stream init, SGD order, SVM).
  void set_seed(std::uint64_t seed);

  // Throws UsageError describing the first bad field.
  void validate() const;

  // All fields except out and jobs, which do not affect results.
  std::string canonical() const;
  std::string hash() const;

  // Throws UsageError on unknown keys, malformed lines or bad values.
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
};

}  // namespace tsf
