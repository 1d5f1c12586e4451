#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tsf/eval.hpp"
#include "tsf/run_config.hpp"

namespace tsf {

using LogFn = std::function<void(const std::string&)>;

// Flow for every consecutive frame pair of every clip in the manifest, saved
// as one stack per clip (flow_dir/<clip stem>.tsfs, tau = 0, L = T - 1).
// Frame pairs of a clip are solved on up to `jobs` threads.
void compute_clip_flows(const DatasetManifest& manifest, const std::filesystem::path& flow_dir,
                        const FlowParams& params, int jobs, const LogFn& log = {});

// Holds `dir/.lock` for its lifetime; throws UsageError when another run
// holds it.
class DirLock {
 public:
  explicit DirLock(const std::filesystem::path& dir);
  ~DirLock();
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  std::filesystem::path path_;
};

// Stage-cached run over one output directory:
//   data/      clips and manifest.tsv
//   flows/     one flow stack per clip
//   models/    stream checkpoints, training histories, the mid-level SVM
//   reports/   per-strategy report, raw counts, confusion CSV and image
//   cache/     one stamp per stage: input key and artifact hashes
// A stage is reused when its stamp's key matches and every artifact still
// hashes to the recorded value; otherwise it is rebuilt. Keys chain the
// content hashes of upstream artifacts, so changed inputs propagate.
class Pipeline {
 public:
  explicit Pipeline(RunConfig config, LogFn log = {});

  const RunConfig& config() const { return config_; }

  const DatasetManifest& data();
  std::filesystem::path flows();
  // Trains (or reuses) the stream; `train = false` only loads the checkpoint.
  const StreamModel& stream(StreamKind kind, bool train = true);
  const SvmModel& svm(bool train = true);

  // Test-split predictions of one strategy, one per test clip in manifest
  // order.
  std::vector<int> predict(Strategy s, bool train = true);
  // Evaluates a strategy and writes its report files.
  EvalReport evaluate(Strategy s, bool train = true);
  // All five strategies plus comparison.csv / comparison_raw.csv.
  std::vector<EvalReport> run_all();

  // Name of the stage being executed (for error messages).
  const std::string& current_stage() const { return stage_; }

 private:
  struct Stamp {
    std::string key;
    std::map<std::string, std::string> artifacts;  // relative path -> sha256
  };

  std::filesystem::path path(const std::string& rel) const { return config_.out / rel; }
  std::optional<Stamp> valid_stamp(const std::string& stage, const std::string& key);
  std::string write_stamp(const std::string& stage, const std::string& key, const std::vector<std::string>& artifacts);
  std::string content_of(const std::string& stage) const;
  void note(const std::string& msg) const;
  const std::vector<ClipData>& clips(Split split);
  bool needs_flows() const;
  std::vector<FusedFeature> fused_features(const ClipData& c);
  void write_run_manifest();

  RunConfig config_;
  LogFn log_;
  DirLock lock_;
  std::string stage_;
  std::map<std::string, std::string> content_;  // stage -> artifact content hash
  std::optional<DatasetManifest> manifest_;
  std::map<int, std::vector<ClipData>> clips_;
  bool clips_have_flows_ = false;
  std::map<StreamKind, StreamModel> models_;
  std::optional<SvmModel> svm_;
};

}  // namespace tsf
