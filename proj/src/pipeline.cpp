#include "tsf/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <sstream>

#include "tsf/binary_io.hpp"
#include "tsf/errors.hpp"
#include "tsf/parallel.hpp"
#include "tsf/seed.hpp"

namespace tsf {

namespace fs = std::filesystem;

namespace {

std::uint64_t kind_tag(StreamKind k) { return static_cast<std::uint64_t>(k) + 1; }

// Lines of the canonical config whose key starts with `prefix`.
std::string section(const RunConfig& c, const std::string& prefix) {
  std::istringstream is(c.canonical());
  std::string line, out;
  while (std::getline(is, line))
    if (line.rfind(prefix, 0) == 0) out += line + "\n";
  return out;
}

std::string stage_name(StreamKind k) { return "stream_" + stream_kind_name(k); }

}  // namespace

void compute_clip_flows(const DatasetManifest& manifest, const fs::path& flow_dir, const FlowParams& params, int jobs,
                        const LogFn& log) {
  params.validate();
  fs::create_directories(flow_dir);
  std::size_t done = 0;
  for (const auto& e : manifest.entries) {
    const auto clip = load_clip(manifest.resolve(e));
    const int pairs = clip.num_frames() - 1;
    if (pairs < 1) throw DataError(e.path + ": need at least two frames for flow");
    std::vector<Image> gray(static_cast<std::size_t>(clip.num_frames()));
    for (int t = 0; t < clip.num_frames(); ++t) gray[static_cast<std::size_t>(t)] = clip.gray(t);
    std::vector<FlowField> flows(static_cast<std::size_t>(pairs));
    parallel_for(flows.size(), jobs, [&](std::size_t k) { flows[k] = estimate_flow(gray[k], gray[k + 1], params); });
    save_flow_stack(build_flow_stack(flows, 0), flow_path_for(flow_dir, e.path));
    if (log && (++done % 10 == 0 || done == manifest.entries.size())) {
      log("flow: " + std::to_string(done) + "/" + std::to_string(manifest.entries.size()) + " clips");
    }
  }
}

DirLock::DirLock(const fs::path& dir) {
  fs::create_directories(dir);
  path_ = dir / ".lock";
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    throw UsageError("output directory " + dir.string() + " is in use by another run (remove " + path_.string() +
                     " if that run is gone)");
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

DirLock::~DirLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

Pipeline::Pipeline(RunConfig config, LogFn log)
    : config_((config.validate(), std::move(config))), log_(std::move(log)), lock_(config_.out) {}

void Pipeline::note(const std::string& msg) const {
  if (log_) log_(msg);
}

std::optional<Pipeline::Stamp> Pipeline::valid_stamp(const std::string& stage, const std::string& key) {
  const auto stamp_path = path("cache/" + stage + ".stamp");
  if (!fs::exists(stamp_path)) return std::nullopt;
  Stamp s;
  std::istringstream is(io::read_text_file(stamp_path));
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind("key ", 0) == 0) {
      s.key = line.substr(4);
    } else if (line.size() > 65) {
      s.artifacts[line.substr(65)] = line.substr(0, 64);
    }
  }
  if (s.key != key) {
    note(stage + ": inputs changed, rebuilding");
    return std::nullopt;
  }
  for (const auto& [rel, hash] : s.artifacts) {
    if (!fs::exists(path(rel)) || io::sha256_hex(io::read_file(path(rel))) != hash) {
      note(stage + ": cached " + rel + " is missing or corrupt, rebuilding");
      return std::nullopt;
    }
  }
  if (s.artifacts.empty()) return std::nullopt;
  std::string body;
  for (const auto& [rel, hash] : s.artifacts) body += hash + " " + rel + "\n";
  content_[stage] = io::sha256_hex(body);
  return s;
}

std::string Pipeline::write_stamp(const std::string& stage, const std::string& key,
                                  const std::vector<std::string>& artifacts) {
  std::map<std::string, std::string> hashes;
  for (const auto& rel : artifacts) hashes[rel] = io::sha256_hex(io::read_file(path(rel)));
  std::string text = "key " + key + "\n", body;
  for (const auto& [rel, hash] : hashes) body += hash + " " + rel + "\n";
  io::write_text_file(path("cache/" + stage + ".stamp"), text + body);
  return content_[stage] = io::sha256_hex(body);
}

std::string Pipeline::content_of(const std::string& stage) const { return content_.at(stage); }

const DatasetManifest& Pipeline::data() {
  if (manifest_) return *manifest_;
  stage_ = "gen-data";
  const std::string key = io::sha256_hex("data\n" + config_.dataset.canonical());
  if (valid_stamp(stage_, key)) {
    manifest_ = read_manifest(path("data/manifest.tsv"));
    note("gen-data: cached");
    return *manifest_;
  }
  fs::remove(path("cache/" + stage_ + ".stamp"));
  fs::remove_all(path("data"));
  note("gen-data: generating clips");
  manifest_ = generate_dataset(config_.dataset, path("data"), config_.jobs);
  std::vector<std::string> artifacts{"data/manifest.tsv"};
  for (const auto& e : manifest_->entries) artifacts.push_back("data/" + e.path);
  write_stamp(stage_, key, artifacts);
  clips_.clear();
  return *manifest_;
}

fs::path Pipeline::flows() {
  const auto& m = data();
  stage_ = "compute-flow";
  if (content_.count(stage_)) return path("flows");
  const std::string key = io::sha256_hex("flows\n" + content_of("gen-data") + "\n" + section(config_, "flow."));
  if (valid_stamp(stage_, key)) {
    note("compute-flow: cached");
    return path("flows");
  }
  fs::remove(path("cache/" + stage_ + ".stamp"));
  fs::remove_all(path("flows"));
  note("compute-flow: " + std::to_string(m.entries.size()) + " clips");
  compute_clip_flows(m, path("flows"), config_.flow, config_.jobs, log_);
  std::vector<std::string> artifacts;
  for (const auto& e : m.entries) artifacts.push_back("flows/" + flow_path_for("", e.path).string());
  write_stamp(stage_, key, artifacts);
  clips_.clear();
  return path("flows");
}

const std::vector<ClipData>& Pipeline::clips(Split split) {
  const bool want_flows = clips_have_flows_;
  const int tag = static_cast<int>(split);
  auto it = clips_.find(tag);
  if (it != clips_.end()) return it->second;
  const auto& m = data();
  return clips_[tag] = load_clip_data(m, split, path("flows"), want_flows, config_.jobs);
}

const StreamModel& Pipeline::stream(StreamKind kind, bool train) {
  const bool flow = kind != StreamKind::spatial;
  if (!train && !models_.count(kind)) {
    stage_ = "load-" + stream_kind_name(kind);
    models_[kind] = load_stream(path("models/" + stream_kind_name(kind) + ".tsst"));
  }
  data();
  if (flow) {
    flows();
    if (!clips_have_flows_) {
      clips_.clear();
      clips_have_flows_ = true;
    }
  }
  if (!train) return models_[kind];
  stage_ = "train-" + stream_kind_name(kind);
  const std::string name = stage_name(kind);
  const auto cfg = config_.stream(kind);
  const std::uint64_t init_seed = derive_seed(config_.train.sgd.seed, kind_tag(kind));
  TrainHyper hyper = config_.train;
  hyper.sgd.seed = derive_seed(config_.train.sgd.seed, kind_tag(kind), 1);
  const std::string key = io::sha256_hex("stream\n" + content_of("gen-data") + "\n" +
                                         (flow ? content_of("compute-flow") : std::string("-")) + "\n" + cfg.to_text() +
                                         section(config_, "train.") + std::to_string(init_seed) + "\n");
  const std::string rel = "models/" + stream_kind_name(kind) + ".tsst";
  if (content_.count(name) && models_.count(kind)) return models_[kind];
  if (valid_stamp(name, key)) {
    models_[kind] = load_stream(path(rel));
    note(stage_ + ": cached");
    return models_[kind];
  }
  fs::remove(path("cache/" + name + ".stamp"));
  note(stage_ + ": " + std::to_string(hyper.epochs) + " epochs");
  auto model = build_stream(cfg, init_seed);
  const auto history = train_stream(model, clips(Split::train), hyper);
  const auto& last = history.epochs.back();
  note(stage_ + ": final loss " + std::to_string(last.loss) + ", train accuracy " + std::to_string(last.train_accuracy));
  fs::create_directories(path("models"));
  save_stream(model, path(rel));
  const std::string hist_rel = "models/" + stream_kind_name(kind) + "_history.csv";
  io::write_text_file(path(hist_rel), history.to_csv());
  write_stamp(name, key, {rel, hist_rel});
  svm_.reset();
  return models_[kind] = std::move(model);
}

std::vector<FusedFeature> Pipeline::fused_features(const ClipData& c) {
  const auto& sp = models_.at(StreamKind::spatial);
  const auto& tp = models_.at(StreamKind::temporal);
  std::vector<FusedFeature> out;
  for (int tau : sample_taus(sp.config, c.clip.num_frames(), config_.samples_per_video)) {
    const auto a = extract_feature(sp, stream_input(sp, c, tau));
    const auto b = extract_feature(tp, stream_input(tp, c, tau));
    out.push_back(l2_normalize(interleave_features(std::span<const float>(a), std::span<const float>(b))));
  }
  return out;
}

const SvmModel& Pipeline::svm(bool train) {
  const std::string rel = "models/mid.tssv";
  if (!train) {
    if (!svm_) {
      stage_ = "load-svm";
      if (!fs::exists(path(rel))) throw DataError("svm model " + path(rel).string() + " does not exist");
      svm_ = load_svm(path(rel));
    }
    stream(StreamKind::spatial, false);
    stream(StreamKind::temporal, false);
    return *svm_;
  }
  stream(StreamKind::spatial);
  stream(StreamKind::temporal);
  stage_ = "train-svm";
  if (svm_ && content_.count("svm")) return *svm_;
  const std::string key =
      io::sha256_hex("svm\n" + content_of(stage_name(StreamKind::spatial)) + "\n" +
                     content_of(stage_name(StreamKind::temporal)) + "\n" + section(config_, "svm.") +
                     section(config_, "eval."));
  if (valid_stamp("svm", key)) {
    svm_ = load_svm(path(rel));
    note("train-svm: cached");
    return *svm_;
  }
  fs::remove(path("cache/svm.stamp"));
  std::vector<FusedFeature> xs;
  std::vector<int> ys;
  for (const auto& c : clips(Split::train)) {
    for (auto& f : fused_features(c)) {
      xs.push_back(std::move(f));
      ys.push_back(c.clip.label);
    }
  }
  note("train-svm: " + std::to_string(xs.size()) + " fused features");
  svm_ = train_linear_svm(xs, ys, kNumClasses, config_.svm);
  int ok = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) ok += svm_predict(*svm_, xs[i]).label == ys[i];
  note("train-svm: training accuracy " + std::to_string(static_cast<double>(ok) / static_cast<double>(xs.size())));
  fs::create_directories(path("models"));
  save_svm(*svm_, path(rel));
  write_stamp("svm", key, {rel});
  return *svm_;
}

std::vector<int> Pipeline::predict(Strategy s, bool train) {
  if (!train) {
    // Every checkpoint is checked before any stage runs.
    for (auto kind : strategy_streams(s)) {
      const auto rel = path("models/" + stream_kind_name(kind) + ".tsst");
      if (!fs::exists(rel)) throw DataError("checkpoint " + rel.string() + " does not exist");
    }
  }
  if (s == Strategy::mid) svm(train);
  for (auto kind : strategy_streams(s)) stream(kind, train);
  stage_ = "evaluate-" + strategy_name(s);
  const int m = config_.samples_per_video;
  std::vector<int> preds;
  const auto& test = clips(Split::test);
  switch (s) {
    case Strategy::spatial_only:
    case Strategy::temporal_only:
    case Strategy::early: {
      const auto& model = models_.at(strategy_streams(s)[0]);
      for (const auto& c : test) preds.push_back(static_cast<int>(predict_video(model, c, m).argmax()));
      break;
    }
    case Strategy::late: {
      std::vector<int> labels;
      for (const auto& e : data().split(Split::train)) labels.push_back(e.label);
      const auto priors = estimate_priors(labels, kNumClasses);
      for (const auto& c : test) {
        const auto a = predict_video(models_.at(StreamKind::spatial), c, m);
        const auto b = predict_video(models_.at(StreamKind::temporal), c, m);
        preds.push_back(static_cast<int>(late_fuse(a, b, priors).argmax()));
      }
      break;
    }
    case Strategy::mid: {
      for (const auto& c : test) {
        std::vector<int> votes;
        for (const auto& f : fused_features(c)) votes.push_back(svm_predict(*svm_, f).label);
        preds.push_back(majority_vote(votes, kNumClasses));
      }
      break;
    }
  }
  return preds;
}

EvalReport Pipeline::evaluate(Strategy s, bool train) {
  const auto preds = predict(s, train);
  std::vector<int> labels;
  for (const auto& c : clips(Split::test)) labels.push_back(c.clip.label);
  const auto name = strategy_name(s);
  auto r = report(confusion(preds, labels, kNumClasses), name);
  fs::create_directories(path("reports"));
  const std::vector<EvalReport> one{r};
  io::write_text_file(path("reports/" + name + ".csv"), report_table_csv(one));
  io::write_text_file(path("reports/" + name + "_raw.csv"), report_raw_csv(one));
  io::write_text_file(path("reports/" + name + "_confusion.csv"), confusion_csv(r.matrix));
  io::write_file(path("reports/" + name + "_confusion.pgm"), confusion_pgm(r.matrix));
  note(name + ": total accuracy " + std::to_string(r.correct) + "/" + std::to_string(r.evaluated));
  write_run_manifest();
  return r;
}

std::vector<EvalReport> Pipeline::run_all() {
  std::vector<EvalReport> reports;
  for (auto s : kAllStrategies) reports.push_back(evaluate(s));
  io::write_text_file(path("reports/comparison.csv"), report_table_csv(reports));
  io::write_text_file(path("reports/comparison_raw.csv"), report_raw_csv(reports));
  return reports;
}

void Pipeline::write_run_manifest() {
  std::ostringstream os;
  os << "config_hash = " << config_.hash() << "\n";
  os << "dataset_seed = " << config_.dataset.seed << "\n";
  os << "train_seed = " << config_.train.sgd.seed << "\n";
  for (auto kind : {StreamKind::spatial, StreamKind::temporal, StreamKind::early}) {
    os << stream_kind_name(kind) << "_init_seed = " << derive_seed(config_.train.sgd.seed, kind_tag(kind)) << "\n";
    os << stream_kind_name(kind) << "_sgd_seed = " << derive_seed(config_.train.sgd.seed, kind_tag(kind), 1) << "\n";
  }
  os << "svm_seed = " << config_.svm.seed << "\n";
  for (const auto& [stage, hash] : content_) os << "stage." << stage << " = " << hash << "\n";
  os << "\n" << config_.canonical();
  io::write_text_file(path("run_manifest.txt"), os.str());
}

}  // namespace tsf
