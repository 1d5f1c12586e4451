#include "tsf/streams.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "tsf/binary_io.hpp"
#include "tsf/errors.hpp"
#include "tsf/fusion.hpp"
#include "tsf/parallel.hpp"
#include "tsf/seed.hpp"

namespace tsf {

namespace {

constexpr char kStreamHeader[] = "TSFSTREAM 1";

std::string join_blocks(const std::vector<std::pair<int, int>>& blocks) {
  std::string s;
  for (const auto& [n, c] : blocks) s += (s.empty() ? "" : ",") + std::to_string(n) + "x" + std::to_string(c);
  return s;
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::ostringstream os;
  os.precision(9);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

bool needs_flow(StreamKind kind) { return kind != StreamKind::spatial; }
bool needs_frame(StreamKind kind) { return kind != StreamKind::temporal; }

}  // namespace

std::string stream_kind_name(StreamKind kind) {
  switch (kind) {
    case StreamKind::spatial:
      return "spatial";
    case StreamKind::temporal:
      return "temporal";
    case StreamKind::early:
      return "early";
  }
  return "?";
}

StreamKind parse_stream_kind(const std::string& name) {
  if (name == "spatial") return StreamKind::spatial;
  if (name == "temporal") return StreamKind::temporal;
  if (name == "early") return StreamKind::early;
  throw InputError("unknown stream kind '" + name + "'");
}

std::size_t StreamConfig::channels_for(StreamKind kind, int flow_length) {
  const auto flow = 2 * static_cast<std::size_t>(std::max(flow_length, 0));
  switch (kind) {
    case StreamKind::spatial:
      return 3;
    case StreamKind::temporal:
      return flow;
    case StreamKind::early:
      return 3 + flow;
  }
  return 0;
}

StreamConfig StreamConfig::desk(StreamKind kind, int flow_length, std::size_t height, std::size_t width) {
  StreamConfig c;
  c.kind = kind;
  c.flow_length = flow_length;
  c.height = height;
  c.width = width;
  c.channels = channels_for(kind, flow_length);
  return c;
}

StreamConfig StreamConfig::full(StreamKind kind, int flow_length) {
  StreamConfig c;
  c.kind = kind;
  c.flow_length = flow_length;
  c.height = c.width = 224;
  c.channels = channels_for(kind, flow_length);
  c.blocks = {{2, 64}, {2, 128}, {3, 256}, {3, 512}, {3, 512}};
  c.fc_dims = {4096, 4096, 6};
  return c;
}

void StreamConfig::validate() const {
  if (flow_length < 1) throw InputError("flow length must be >= 1");
  if (channels != channels_for(kind, flow_length)) {
    throw InputError(stream_kind_name(kind) + " stream needs " + std::to_string(channels_for(kind, flow_length)) +
                     " input channels for L=" + std::to_string(flow_length) + ", got " + std::to_string(channels));
  }
  if (height < 1 || width < 1) throw InputError("stream input dims must be positive");
  if (blocks.empty()) throw InputError("stream needs at least one conv block");
  for (const auto& [n, c] : blocks)
    if (n < 1 || c < 1) throw InputError("conv blocks need positive counts and channels");
  if (fc_dims.size() < 2) throw InputError("fc dims must list the feature width and the class count");
  for (auto d : fc_dims)
    if (d < 1) throw InputError("fc dims must be positive");
  if (n_classes() < 2) throw InputError("need at least two classes");
  if (!(flow_clip > 0.0)) throw InputError("flow clip must be > 0");
  plan_stream(*this);
}

std::string StreamConfig::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "kind = " << stream_kind_name(kind) << "\nheight = " << height << "\nwidth = " << width
     << "\nchannels = " << channels << "\nflow_length = " << flow_length << "\nblocks = " << join_blocks(blocks)
     << "\nfc = " << join(fc_dims) << "\nflow_clip = " << flow_clip << "\n";
  return os.str();
}

StreamConfig StreamConfig::from_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  for (const auto& line : split(text, '\n')) {
    if (line.empty()) continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw FormatError("bad stream config line '" + line + "'", 0);
    kv[line.substr(0, eq)] = line.substr(eq + 3);
  }
  auto get = [&](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(std::string("stream config lacks ") + key, 0);
    return it->second;
  };
  StreamConfig c;
  try {
    c.kind = parse_stream_kind(get("kind"));
    c.height = std::stoul(get("height"));
    c.width = std::stoul(get("width"));
    c.channels = std::stoul(get("channels"));
    c.flow_length = std::stoi(get("flow_length"));
    c.blocks.clear();
    for (const auto& b : split(get("blocks"), ',')) {
      const auto x = b.find('x');
      if (x == std::string::npos) throw FormatError("bad block '" + b + "'", 0);
      c.blocks.emplace_back(std::stoi(b.substr(0, x)), std::stoi(b.substr(x + 1)));
    }
    c.fc_dims.clear();
    for (const auto& d : split(get("fc"), ',')) c.fc_dims.push_back(std::stoul(d));
    c.flow_clip = std::stod(get("flow_clip"));
  } catch (const std::logic_error&) {
    throw FormatError("unparsable stream config", 0);
  } catch (const InputError& e) {
    throw FormatError(e.what(), 0);
  }
  return c;
}

std::vector<LayerPlan> plan_stream(const StreamConfig& config) {
  std::vector<LayerPlan> plan;
  Dims d = config.input_dims();
  std::size_t index = 0;
  auto fail = [&](const std::string& what) {
    throw ShapeError("layer " + std::to_string(index) + " (" + what + "): cannot take input " + format_dims(d));
  };
  for (const auto& [count, out] : config.blocks) {
    for (int k = 0; k < count; ++k) {
      if (d[0] < 1 || d[1] < 1) fail("conv3x3");
      const Dims o{d[0], d[1], static_cast<std::size_t>(out)};
      plan.push_back({LayerKind::conv3x3, d, o, 9 * d[2] * o[2] + o[2]});
      ++index;
      plan.push_back({LayerKind::relu, o, o, 0});
      ++index;
      d = o;
    }
    if (d[0] < 2 || d[1] < 2) fail("maxpool2x2");
    const Dims o{d[0] / 2, d[1] / 2, d[2]};
    plan.push_back({LayerKind::maxpool2x2, d, o, 0});
    ++index;
    d = o;
  }
  std::size_t in = dims_product(d);
  for (std::size_t k = 0; k < config.fc_dims.size(); ++k) {
    const std::size_t out = config.fc_dims[k];
    plan.push_back({LayerKind::dense, k == 0 ? d : Dims{in}, Dims{out}, in * out + out});
    ++index;
    if (k + 1 < config.fc_dims.size()) {
      plan.push_back({LayerKind::relu, Dims{out}, Dims{out}, 0});
      ++index;
    }
    in = out;
  }
  return plan;
}

StreamModel build_stream(const StreamConfig& config, std::uint64_t seed) {
  config.validate();
  StreamModel m{config, {}, {}};
  for (const auto& layer : plan_stream(config)) {
    switch (layer.kind) {
      case LayerKind::conv3x3:
        m.net.add_conv3x3(layer.input[2], layer.output[2]);
        break;
      case LayerKind::relu:
        m.net.add_relu();
        break;
      case LayerKind::maxpool2x2:
        m.net.add_maxpool2x2();
        break;
      case LayerKind::dense:
        m.net.add_dense(dims_product(layer.input), layer.output[0]);
        break;
    }
  }
  init_he(m.net, seed);
  return m;
}

int max_tau(const StreamConfig& config, int num_frames) { return num_frames - config.flow_length - 1; }

std::vector<int> sample_taus(const StreamConfig& config, int num_frames, int m) {
  const int top = max_tau(config, num_frames);
  if (top < 0) {
    throw DataError("clip of " + std::to_string(num_frames) + " frames is too short for flow length " +
                    std::to_string(config.flow_length));
  }
  if (m < 1) throw InputError("need at least one sample per video");
  if (m == 1) return {top / 2};
  std::vector<int> taus;
  for (int i = 0; i < m; ++i) taus.push_back(static_cast<int>(std::lround(static_cast<double>(i) * top / (m - 1))));
  return taus;
}

Tensor<float> stream_input(const StreamModel& model, const ClipData& data, int tau) {
  const auto& cfg = model.config;
  if (tau < 0 || tau > max_tau(cfg, data.clip.num_frames())) {
    throw DataError(data.name + ": start frame " + std::to_string(tau) + " outside [0, " +
                    std::to_string(max_tau(cfg, data.clip.num_frames())) + "]");
  }
  if (data.clip.height() != cfg.height || data.clip.width() != cfg.width) {
    throw ShapeError(data.name + ": clip frames are " + std::to_string(data.clip.height()) + "x" +
                     std::to_string(data.clip.width()) + ", stream expects " + std::to_string(cfg.height) + "x" +
                     std::to_string(cfg.width));
  }
  Tensor<float> frame, flow;
  if (needs_frame(cfg.kind)) {
    frame = data.clip.frame(tau);
    if (!model.frame_mean.empty()) {
      for (std::size_t k = 0; k < frame.size(); ++k) frame[k] -= model.frame_mean[k % 3];
    }
  }
  if (needs_flow(cfg.kind)) {
    if (!data.flows) throw DataError(data.name + ": no flow stack for start frame " + std::to_string(tau));
    try {
      flow = normalize_flow_for_net(slice_flow_stack(*data.flows, tau, cfg.flow_length), cfg.flow_clip);
    } catch (const DataError& e) {
      throw DataError(data.name + ": missing flow for start frame " + std::to_string(tau) + ": " + e.what());
    }
  }
  switch (cfg.kind) {
    case StreamKind::spatial:
      return frame;
    case StreamKind::temporal:
      return flow;
    case StreamKind::early:
      return assemble_early_input(frame, flow);
  }
  return {};
}

void TrainHyper::validate() const {
  sgd.validate();
  if (batch_size < 1) throw InputError("batch size must be >= 1");
  if (epochs < 1) throw InputError("epochs must be >= 1");
  if (frames_per_clip_per_epoch < 1) throw InputError("frames per clip per epoch must be >= 1");
}

std::string TrainHistory::to_csv() const {
  std::string s = "epoch,loss,train_accuracy\n";
  char line[96];
  for (const auto& e : epochs) {
    std::snprintf(line, sizeof line, "%d,%.9g,%.9g\n", e.epoch, e.loss, e.train_accuracy);
    s += line;
  }
  return s;
}

std::vector<float> frame_channel_mean(std::span<const ClipData> clips) {
  double sum[3] = {0, 0, 0};
  std::size_t n = 0;
  for (const auto& c : clips) {
    const auto& px = c.clip.frames.values();
    for (std::size_t k = 0; k < px.size(); ++k) sum[k % 3] += px[k];
    n += px.size() / 3;
  }
  if (n == 0) throw DataError("no frames to average");
  return {static_cast<float>(sum[0] / n), static_cast<float>(sum[1] / n), static_cast<float>(sum[2] / n)};
}

TrainHistory train_stream(StreamModel& model, std::span<const ClipData> clips, const TrainHyper& hyper) {
  hyper.validate();
  if (clips.empty()) throw DataError("no training clips");
  const auto& cfg = model.config;
  for (const auto& c : clips) {
    if (needs_flow(cfg.kind) && !c.flows) throw DataError(c.name + ": no flow stack for any start frame");
    if (max_tau(cfg, c.clip.num_frames()) < 0) throw DataError(c.name + ": clip too short for the flow length");
    if (c.clip.label < 0 || static_cast<std::size_t>(c.clip.label) >= cfg.n_classes()) {
      throw DataError(c.name + ": label out of range");
    }
  }
  if (needs_frame(cfg.kind) && model.frame_mean.empty()) model.frame_mean = frame_channel_mean(clips);

  SgdOptimizer<float> opt(hyper.sgd);
  std::mt19937_64 rng(derive_seed(hyper.sgd.seed, 0x747261696e));
  TrainHistory history;
  std::size_t batch_index = 0;
  const std::size_t n_out = cfg.n_classes();

  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    std::vector<std::pair<std::size_t, int>> samples;
    for (std::size_t i = 0; i < clips.size(); ++i) {
      const int top = max_tau(cfg, clips[i].clip.num_frames());
      std::uniform_int_distribution<int> pick(0, top);
      if (hyper.fixed_tau) {
        if (*hyper.fixed_tau < 0 || *hyper.fixed_tau > top) throw DataError("fixed start frame outside clip range");
        samples.emplace_back(i, *hyper.fixed_tau);
      } else {
        for (int k = 0; k < hyper.frames_per_clip_per_epoch; ++k) samples.emplace_back(i, pick(rng));
      }
    }
    std::shuffle(samples.begin(), samples.end(), rng);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < samples.size(); start += static_cast<std::size_t>(hyper.batch_size)) {
      const std::size_t end = std::min(samples.size(), start + static_cast<std::size_t>(hyper.batch_size));
      const float scale = 1.0f / static_cast<float>(end - start);
      double batch_loss = 0.0;
      model.net.zero_grad();
      for (std::size_t s = start; s < end; ++s) {
        const auto& [ci, tau] = samples[s];
        const auto label = static_cast<std::size_t>(clips[ci].clip.label);
        ForwardTrace<float> trace;
        const auto logits = model.net.forward(stream_input(model, clips[ci], tau), &trace);
        if (!logits.all_finite()) throw DivergenceError("non-finite logits", batch_index);
        const auto probs = softmax(logits);
        batch_loss += cross_entropy_loss(probs, label);
        correct += probs.argmax() == label;
        const auto g = softmax_cross_entropy_grad(probs, label);
        Tensor<float> up({n_out});
        for (std::size_t j = 0; j < n_out; ++j) up[j] = static_cast<float>(g[j]) * scale;
        model.net.backward(trace, up);
      }
      if (!std::isfinite(batch_loss)) throw DivergenceError("non-finite training loss", batch_index);
      loss_sum += batch_loss;
      auto params = model.net.parameters();
      opt.step(params);
      ++batch_index;
    }
    history.epochs.push_back({epoch, loss_sum / static_cast<double>(samples.size()),
                              static_cast<double>(correct) / static_cast<double>(samples.size())});
  }
  return history;
}

std::filesystem::path flow_path_for(const std::filesystem::path& flow_dir, const std::string& clip_path) {
  return flow_dir / (std::filesystem::path(clip_path).stem().string() + ".tsfs");
}

std::vector<ClipData> load_clip_data(const DatasetManifest& manifest, Split split,
                                     const std::filesystem::path& flow_dir, bool need_flows, int jobs) {
  const auto entries = manifest.split(split);
  std::vector<ClipData> out(entries.size());
  parallel_for(entries.size(), jobs, [&](std::size_t i) {
    const auto path = manifest.resolve(entries[i]);
    out[i].name = entries[i].path;
    out[i].clip = load_clip(path);
    if (out[i].clip.label != entries[i].label) {
      throw DataError(path.string() + ": label " + std::to_string(out[i].clip.label) + " disagrees with manifest");
    }
    if (need_flows) {
      const auto flow_path = flow_path_for(flow_dir, entries[i].path);
      if (!std::filesystem::exists(flow_path)) {
        throw DataError(entries[i].path + ": flow stack " + flow_path.string() + " is missing");
      }
      out[i].flows = load_flow_stack(flow_path);
    }
  });
  return out;
}

std::vector<double> predict_logits(const StreamModel& model, const Tensor<float>& input) {
  if (input.dims() != model.config.input_dims()) {
    throw ShapeError("stream expects input " + format_dims(model.config.input_dims()) + ", got " +
                     format_dims(input.dims()));
  }
  const auto y = model.net.forward(input);
  return {y.data().begin(), y.data().end()};
}

ScoreVector predict_frame(const StreamModel& model, const Tensor<float>& input) {
  const auto z = predict_logits(model, input);
  return softmax(std::span<const double>(z));
}

std::vector<float> extract_feature(const StreamModel& model, const Tensor<float>& input) {
  if (input.dims() != model.config.input_dims()) {
    throw ShapeError("stream expects input " + format_dims(model.config.input_dims()) + ", got " +
                     format_dims(input.dims()));
  }
  const auto f = model.net.forward_prefix(input, model.net.size() - 1);
  return {f.data().begin(), f.data().end()};
}

ScoreVector mean_scores(std::span<const ScoreVector> scores) {
  if (scores.empty()) throw DataError("no scores to average");
  std::vector<double> m(scores[0].size(), 0.0);
  for (const auto& s : scores) {
    if (s.size() != m.size()) throw ShapeError("score vectors differ in length");
    for (std::size_t j = 0; j < m.size(); ++j) m[j] += s[j];
  }
  for (double& x : m) x /= static_cast<double>(scores.size());
  return ScoreVector(std::move(m));
}

ScoreVector predict_video(const StreamModel& model, const ClipData& data, int m) {
  std::vector<ScoreVector> per;
  for (int tau : sample_taus(model.config, data.clip.num_frames(), m)) {
    per.push_back(predict_frame(model, stream_input(model, data, tau)));
  }
  return mean_scores(per);
}

std::vector<std::uint8_t> encode_stream(const StreamModel& model) {
  std::string header = std::string(kStreamHeader) + "\n" + model.config.to_text();
  header += "frame_mean = " + join(model.frame_mean) + "\nend\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const auto ck = encode_checkpoint(model.net);
  out.insert(out.end(), ck.begin(), ck.end());
  return out;
}

StreamModel decode_stream(std::span<const std::uint8_t> bytes) {
  const std::string magic = std::string(kStreamHeader) + "\n";
  if (bytes.size() < magic.size() || !std::equal(magic.begin(), magic.end(), bytes.begin())) {
    throw FormatError("not a stream checkpoint", 0);
  }
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  const auto end = text.find("\nend\n");
  if (end == std::string_view::npos) throw FormatError("stream header is not terminated", bytes.size());
  std::string cfg_text, mean_text;
  for (const auto& line : split(std::string(text.substr(magic.size(), end + 1 - magic.size())), '\n')) {
    if (line.rfind("frame_mean = ", 0) == 0) mean_text = line.substr(13);
    else cfg_text += line + "\n";
  }
  StreamModel m;
  m.config = StreamConfig::from_text(cfg_text);
  try {
    for (const auto& v : split(mean_text, ',')) m.frame_mean.push_back(std::stof(v));
  } catch (const std::logic_error&) {
    throw FormatError("bad frame mean in stream header", magic.size());
  }
  const std::size_t body = end + 5;
  try {
    m.net = decode_checkpoint(bytes.subspan(body));
  } catch (const FormatError& e) {
    throw FormatError(std::string("stream checkpoint body: ") + e.what(), body + e.offset());
  }
  // The network must match the declared topology.
  const auto plan = plan_stream(m.config);
  bool ok = plan.size() == m.net.size();
  for (std::size_t k = 0; ok && k < plan.size(); ++k) {
    const auto& l = m.net.layers()[k];
    ok = l.kind == plan[k].kind &&
         (l.params.empty() || l.params.weights.size() + l.params.biases.size() == plan[k].parameters);
  }
  if (!ok) throw FormatError("stream checkpoint layers do not match its config", body);
  return m;
}

void save_stream(const StreamModel& model, const std::filesystem::path& path) {
  io::write_file(path, encode_stream(model));
}

StreamModel load_stream(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("checkpoint " + path.string() + " does not exist");
  return decode_stream(io::read_file(path));
}

}  // namespace tsf
