#include "tsf/run_config.hpp"

#include <functional>
#include <limits>
#include <sstream>

#include "tsf/binary_io.hpp"
#include "tsf/errors.hpp"

namespace tsf {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

double to_double(const std::string& v) {
  std::size_t used = 0;
  const double x = std::stod(v, &used);
  if (used != v.size()) throw std::invalid_argument(v);
  return x;
}

long long to_int(const std::string& v) {
  std::size_t used = 0;
  const long long x = std::stoll(v, &used);
  if (used != v.size()) throw std::invalid_argument(v);
  return x;
}

std::uint64_t to_u64(const std::string& v) {
  if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
  std::size_t used = 0;
  const unsigned long long x = std::stoull(v, &used);
  if (used != v.size()) throw std::invalid_argument(v);
  return x;
}

int to_small_int(const std::string& v) {
  const long long x = to_int(v);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) throw std::out_of_range(v);
  return static_cast<int>(x);
}

std::size_t to_size(const std::string& v) {
  const long long x = to_int(v);
  if (x < 0) throw std::out_of_range(v);
  return static_cast<std::size_t>(x);
}

struct Field {
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define TSF_DOUBLE(key, member) \
  Field{key, [](const RunConfig& c) { return fmt(c.member); }, [](RunConfig& c, const std::string& v) { c.member = to_double(v); }}
#define TSF_INT(key, member)                                                     \
  Field{key, [](const RunConfig& c) { return std::to_string(c.member); }, \
        [](RunConfig& c, const std::string& v) { c.member = to_small_int(v); }}
#define TSF_SIZE(key, member)                                                    \
  Field{key, [](const RunConfig& c) { return std::to_string(c.member); }, \
        [](RunConfig& c, const std::string& v) { c.member = to_size(v); }}
#define TSF_SEED(key, member)                                                    \
  Field{key, [](const RunConfig& c) { return std::to_string(c.member); }, \
        [](RunConfig& c, const std::string& v) { c.member = to_u64(v); }}

// Order here is the canonical order.
const std::vector<Field>& fields() {
  static const std::vector<Field> f{
      Field{"dataset.counts",
            [](const RunConfig& c) {
              std::string s;
              for (std::size_t k = 0; k < c.dataset.counts.size(); ++k) s += (k ? "," : "") + std::to_string(c.dataset.counts[k]);
              return s;
            },
            [](RunConfig& c, const std::string& v) {
              const auto parts = split(v, ',');
              if (parts.size() != c.dataset.counts.size()) {
                throw std::invalid_argument("need " + std::to_string(c.dataset.counts.size()) + " counts");
              }
              for (std::size_t k = 0; k < parts.size(); ++k) c.dataset.counts[k] = to_small_int(parts[k]);
            }},
      TSF_DOUBLE("dataset.split_ratio", dataset.split_ratio),
      TSF_SEED("dataset.seed", dataset.seed),
      TSF_INT("dataset.frames", dataset.num_frames),
      TSF_SIZE("dataset.height", dataset.height),
      TSF_SIZE("dataset.width", dataset.width),
      TSF_DOUBLE("dataset.noise", dataset.noise_level),
      TSF_DOUBLE("flow.alpha", flow.alpha),
      TSF_DOUBLE("flow.gamma", flow.gamma),
      TSF_DOUBLE("flow.eta", flow.eta),
      TSF_INT("flow.levels", flow.levels),
      TSF_SIZE("flow.min_dim", flow.min_dim),
      TSF_INT("flow.outer", flow.outer_iterations),
      TSF_INT("flow.inner", flow.inner_iterations),
      TSF_DOUBLE("flow.omega", flow.sor_omega),
      TSF_INT("flow.sweeps", flow.sor_sweeps),
      TSF_DOUBLE("flow.epsilon", flow.penalty_epsilon),
      TSF_DOUBLE("flow.energy_tolerance", flow.energy_tolerance),
      TSF_INT("flow.max_backtracks", flow.max_backtracks),
      TSF_INT("stream.flow_length", flow_length),
      Field{"stream.blocks",
            [](const RunConfig& c) {
              std::string s;
              for (std::size_t k = 0; k < c.blocks.size(); ++k) {
                s += (k ? "," : "") + std::to_string(c.blocks[k].first) + "x" + std::to_string(c.blocks[k].second);
              }
              return s;
            },
            [](RunConfig& c, const std::string& v) {
              c.blocks.clear();
              for (const auto& b : split(v, ',')) {
                const auto x = b.find('x');
                if (x == std::string::npos) throw std::invalid_argument("block '" + b + "' is not <convs>x<channels>");
                c.blocks.emplace_back(to_small_int(b.substr(0, x)), to_small_int(b.substr(x + 1)));
              }
            }},
      Field{"stream.fc",
            [](const RunConfig& c) {
              std::string s;
              for (std::size_t k = 0; k < c.fc_dims.size(); ++k) s += (k ? "," : "") + std::to_string(c.fc_dims[k]);
              return s;
            },
            [](RunConfig& c, const std::string& v) {
              c.fc_dims.clear();
              for (const auto& d : split(v, ',')) c.fc_dims.push_back(to_size(d));
            }},
      TSF_DOUBLE("stream.flow_clip", flow_clip),
      TSF_DOUBLE("train.lr", train.sgd.learning_rate),
      TSF_DOUBLE("train.momentum", train.sgd.momentum),
      TSF_DOUBLE("train.weight_decay", train.sgd.weight_decay),
      TSF_SEED("train.seed", train.sgd.seed),
      TSF_INT("train.batch", train.batch_size),
      TSF_INT("train.epochs", train.epochs),
      TSF_INT("train.frames_per_clip", train.frames_per_clip_per_epoch),
      TSF_DOUBLE("svm.C", svm.C),
      TSF_INT("svm.epochs", svm.epochs),
      TSF_SEED("svm.seed", svm.seed),
      TSF_INT("eval.samples", samples_per_video),
      Field{"run.strategy", [](const RunConfig& c) { return strategy_name(c.strategy); },
            [](RunConfig& c, const std::string& v) { c.strategy = parse_strategy(v); }},
      Field{"run.out", [](const RunConfig& c) { return c.out.string(); },
            [](RunConfig& c, const std::string& v) { c.out = v; }},
      TSF_INT("run.jobs", jobs),
  };
  return f;
}

#undef TSF_DOUBLE
#undef TSF_INT
#undef TSF_SIZE
#undef TSF_SEED

}  // namespace

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::spatial_only:
      return "spatial_only";
    case Strategy::temporal_only:
      return "temporal_only";
    case Strategy::early:
      return "early";
    case Strategy::mid:
      return "mid";
    case Strategy::late:
      return "late";
  }
  return "?";
}

Strategy parse_strategy(const std::string& name) {
  for (auto s : kAllStrategies)
    if (strategy_name(s) == name) return s;
  throw UsageError("unknown strategy '" + name + "' (expected spatial_only, temporal_only, early, mid or late)");
}

std::vector<StreamKind> strategy_streams(Strategy s) {
  switch (s) {
    case Strategy::spatial_only:
      return {StreamKind::spatial};
    case Strategy::temporal_only:
      return {StreamKind::temporal};
    case Strategy::early:
      return {StreamKind::early};
    case Strategy::mid:
    case Strategy::late:
      return {StreamKind::spatial, StreamKind::temporal};
  }
  return {};
}

StreamConfig RunConfig::stream(StreamKind kind) const {
  auto c = StreamConfig::desk(kind, flow_length, dataset.height, dataset.width);
  c.blocks = blocks;
  c.fc_dims = fc_dims;
  c.flow_clip = flow_clip;
  return c;
}

void RunConfig::set_seed(std::uint64_t seed) {
  train.sgd.seed = seed;
  svm.seed = seed;
}

void RunConfig::validate() const {
  try {
    dataset.validate();
    flow.validate();
    train.validate();
    train.sgd.validate_strict();
    svm.validate();
    if (fc_dims.empty() || fc_dims.back() != kNumClasses) {
      throw InputError("stream.fc must end in the class count " + std::to_string(kNumClasses));
    }
    for (auto kind : {StreamKind::spatial, StreamKind::temporal, StreamKind::early}) {
      const auto c = stream(kind);
      c.validate();
      plan_stream(c);
      if (max_tau(c, dataset.num_frames) < 0) {
        throw InputError("dataset.frames must exceed stream.flow_length");
      }
    }
    if (samples_per_video < 1) throw InputError("eval.samples must be >= 1");
    if (jobs < 1) throw InputError("run.jobs must be >= 1");
    if (out.empty()) throw InputError("run.out must not be empty");
  } catch (const UsageError&) {
    throw;
  } catch (const Error& e) {
    throw UsageError(std::string("invalid config: ") + e.what());
  }
}

std::string RunConfig::canonical() const {
  std::string out_text;
  for (const auto& f : fields()) {
    const std::string key = f.key;
    if (key == "run.out" || key == "run.jobs") continue;
    out_text += key + " = " + f.get(*this) + "\n";
  }
  return out_text;
}

std::string RunConfig::hash() const { return io::sha256_hex(canonical()); }

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig c;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(line_no) + ": expected 'section.key = value'");
    }
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    const Field* field = nullptr;
    for (const auto& f : fields())
      if (key == f.key) field = &f;
    if (!field) throw UsageError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    try {
      field->set(c, value);
    } catch (const UsageError&) {
      throw;
    } catch (const std::exception&) {
      throw UsageError("config line " + std::to_string(line_no) + ": bad value '" + value + "' for " + key);
    }
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw UsageError("config file " + path.string() + " does not exist");
  return parse(io::read_text_file(path));
}

}  // namespace tsf
