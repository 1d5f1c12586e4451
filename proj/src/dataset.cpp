#include "tsf/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "tsf/binary_io.hpp"
#include "tsf/errors.hpp"
#include "tsf/parallel.hpp"
#include "tsf/seed.hpp"

namespace tsf {

namespace {

constexpr char kClipMagic[] = "TSCL";
constexpr std::uint32_t kClipVersion = 1;
constexpr int kSupersample = 4;

// Sizes below are for 64 x 64 frames and scale with the smaller frame dim.
constexpr double kSizeLo = 9.0, kSizeHi = 11.0;
constexpr double kRowJitter = 4.0;  // vertical placement range around the middle row
constexpr double kAmpLo = 8.0, kAmpHi = 12.0;
constexpr double kPeriodLo = 10.0, kPeriodHi = 20.0;

// Half-extent of the shape in x and y relative to `size`, for placement.
constexpr double kSquareHalf = 0.886226925452758;  // sqrt(pi) / 2: same area as the disk
constexpr double kTriangleRadius = 1.555185243;    // circumradius of the equal-area triangle

bool inside(ShapeKind shape, double size, double dx, double dy) {
  switch (shape) {
    case ShapeKind::disk:
      return dx * dx + dy * dy <= size * size;
    case ShapeKind::square: {
      const double h = kSquareHalf * size;
      return std::abs(dx) <= h && std::abs(dy) <= h;
    }
    case ShapeKind::triangle: {
      // Upward equilateral triangle centred on its centroid.
      const double R = kTriangleRadius * size;
      const double s3 = std::numbers::sqrt3;
      if (dy > R / 2) return false;
      // Left and right edges through the apex (0, -R) and base corners.
      return s3 * dx - dy <= R && -s3 * dx - dy <= R;
    }
  }
  return false;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace

ShapeKind class_shape(int class_id) { return static_cast<ShapeKind>(class_id / 2); }
MotionKind class_motion(int class_id) { return static_cast<MotionKind>(class_id % 2); }

std::string class_name(int class_id) {
  static const char* shapes[] = {"disk", "square", "triangle"};
  return std::string(shapes[class_id / 2]) + (class_id % 2 ? "-oscillating" : "-stationary");
}

void ClipSpec::validate(int min_frames) const {
  if (class_id < 0 || class_id >= kNumClasses) throw InputError("class id " + std::to_string(class_id) + " out of range");
  if (num_frames < std::max(min_frames, 2)) {
    throw InputError("clip needs at least " + std::to_string(std::max(min_frames, 2)) + " frames, got " +
                     std::to_string(num_frames));
  }
  if (height < 32 || width < 32) throw InputError("clip frames must be at least 32x32");
  if (!(noise_level >= 0.0)) throw InputError("noise level must be >= 0");
}

ClipScene clip_scene(const ClipSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const double scale = static_cast<double>(std::min(spec.height, spec.width)) / 64.0;
  ClipScene s;
  s.shape = class_shape(spec.class_id);
  s.motion = class_motion(spec.class_id);
  s.size = scale * uniform(rng, kSizeLo, kSizeHi);
  const double gray = uniform(rng, 0.75, 0.95);
  for (auto& c : s.color) c = gray;
  s.amplitude = scale * uniform(rng, kAmpLo, kAmpHi);
  s.period = uniform(rng, kPeriodLo, kPeriodHi);
  s.phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double reach = scale * (kTriangleRadius * kSizeHi + 1.0);
  const double W = static_cast<double>(spec.width), H = static_cast<double>(spec.height);
  s.cx = uniform(rng, s.amplitude + reach, W - 1.0 - s.amplitude - reach);
  s.cy = uniform(rng, (H - 1.0) / 2 - scale * kRowJitter, (H - 1.0) / 2 + scale * kRowJitter);

  // Low-contrast smooth texture around a dark base colour.
  s.background = Tensor<float>({spec.height, spec.width, 3});
  for (std::size_t c = 0; c < 3; ++c) {
    const double base = uniform(rng, 0.15, 0.35);
    Image tex(spec.height, spec.width);
    for (auto& p : tex.pixels()) p = uniform(rng, -1.0, 1.0);
    tex = gaussian_blur(tex, 2.0);
    for (std::size_t k = 0; k < tex.size(); ++k) s.background[k * 3 + c] = static_cast<float>(base + 0.25 * tex[k]);
  }
  return s;
}

std::array<double, 2> shape_center(const ClipScene& scene, int t) {
  const double tt = scene.motion == MotionKind::oscillating ? static_cast<double>(t) : 0.0;
  return {scene.cx + scene.amplitude * std::sin(2.0 * std::numbers::pi * tt / scene.period + scene.phase), scene.cy};
}

Tensor<float> VideoClip::frame(int t) const {
  const std::size_t n = height() * width() * 3;
  const auto first = frames.values().begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(t) * n);
  return Tensor<float>({height(), width(), 3}, std::vector<float>(first, first + static_cast<std::ptrdiff_t>(n)));
}

Image VideoClip::gray(int t) const { return to_grayscale(frame(t)); }

VideoClip generate_clip(const ClipSpec& spec) {
  const ClipScene scene = clip_scene(spec);
  // Noise draws come from a child stream so scene parameters do not depend on
  // the frame count.
  std::mt19937_64 noise_rng(derive_seed(spec.seed, 0x6e6f697365));
  std::normal_distribution<double> noise(0.0, 1.0);
  const std::size_t H = spec.height, W = spec.width, T = static_cast<std::size_t>(spec.num_frames);
  VideoClip clip{Tensor<float>({T, H, W, 3}), spec.class_id, spec};
  for (std::size_t t = 0; t < T; ++t) {
    const auto [cx, cy] = shape_center(scene, static_cast<int>(t));
    float* out = clip.frames.raw() + t * H * W * 3;
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j) {
        int hits = 0;
        for (int a = 0; a < kSupersample; ++a)
          for (int b = 0; b < kSupersample; ++b) {
            const double y = static_cast<double>(i) + (a + 0.5) / kSupersample - 0.5;
            const double x = static_cast<double>(j) + (b + 0.5) / kSupersample - 0.5;
            hits += inside(scene.shape, scene.size, x - cx, y - cy);
          }
        const double alpha = static_cast<double>(hits) / (kSupersample * kSupersample);
        for (std::size_t c = 0; c < 3; ++c) {
          const std::size_t k = (i * W + j) * 3 + c;
          double v = (1.0 - alpha) * scene.background[k] + alpha * scene.color[c];
          if (spec.noise_level > 0.0) v += spec.noise_level * noise(noise_rng);
          out[k] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
      }
  }
  return clip;
}

std::vector<std::uint8_t> encode_clip(const VideoClip& clip) {
  io::ByteWriter w;
  w.magic(kClipMagic);
  w.u32(kClipVersion);
  w.i32(clip.num_frames());
  w.i32(static_cast<std::int32_t>(clip.height()));
  w.i32(static_cast<std::int32_t>(clip.width()));
  w.i32(3);
  w.i32(clip.label);
  w.f32s(clip.frames.data());
  return w.take();
}

VideoClip decode_clip(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  r.expect_magic(kClipMagic, "clip");
  const std::size_t version_at = r.offset();
  if (r.u32() != kClipVersion) throw FormatError("unsupported clip version", version_at);
  const std::size_t header_at = r.offset();
  const std::int32_t T = r.i32(), H = r.i32(), W = r.i32(), C = r.i32(), label = r.i32();
  if (T < 1 || H < 1 || W < 1 || C != 3) throw FormatError("invalid clip dims", header_at);
  if (label < 0 || label >= kNumClasses) throw FormatError("clip label out of range", header_at + 16);
  const std::size_t n = static_cast<std::size_t>(T) * static_cast<std::size_t>(H) * static_cast<std::size_t>(W) * 3;
  if (r.remaining() != 4 * n) {
    throw FormatError("clip payload is " + std::to_string(r.remaining()) + " bytes, expected " + std::to_string(4 * n),
                      r.offset());
  }
  VideoClip clip;
  clip.frames = Tensor<float>({static_cast<std::size_t>(T), static_cast<std::size_t>(H), static_cast<std::size_t>(W), 3});
  r.f32s(clip.frames.data());
  r.expect_end("clip");
  clip.label = label;
  clip.spec.class_id = label;
  clip.spec.num_frames = T;
  clip.spec.height = static_cast<std::size_t>(H);
  clip.spec.width = static_cast<std::size_t>(W);
  return clip;
}

void save_clip(const VideoClip& clip, const std::filesystem::path& path) { io::write_file(path, encode_clip(clip)); }

VideoClip load_clip(const std::filesystem::path& path) { return decode_clip(io::read_file(path)); }

std::string split_name(Split s) { return s == Split::train ? "train" : "test"; }

void DatasetConfig::validate() const {
  for (int c = 0; c < kNumClasses; ++c) {
    if (counts[static_cast<std::size_t>(c)] < 2) {
      throw InputError("class " + std::to_string(c) + " needs at least 2 clips");
    }
  }
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw InputError("split ratio must be in (0, 1)");
  ClipSpec{0, 0, num_frames, height, width, noise_level}.validate();
}

std::string DatasetConfig::canonical() const {
  std::ostringstream os;
  os.precision(17);
  os << "counts =";
  for (int c : counts) os << ' ' << c;
  os << "\nsplit_ratio = " << split_ratio << "\nseed = " << seed << "\nnum_frames = " << num_frames
     << "\nheight = " << height << "\nwidth = " << width << "\nnoise_level = " << noise_level << "\n";
  return os.str();
}

std::string DatasetConfig::hash() const { return io::sha256_hex(canonical()); }

std::array<std::array<int, 2>, kNumClasses> DatasetManifest::class_counts() const {
  std::array<std::array<int, 2>, kNumClasses> out{};
  for (const auto& e : entries) ++out[static_cast<std::size_t>(e.label)][e.split == Split::train ? 0 : 1];
  return out;
}

std::vector<ManifestEntry> DatasetManifest::split(Split s) const {
  std::vector<ManifestEntry> out;
  std::copy_if(entries.begin(), entries.end(), std::back_inserter(out), [s](const auto& e) { return e.split == s; });
  return out;
}

std::uint64_t clip_seed(std::uint64_t dataset_seed, int class_id, int index) {
  return derive_seed(dataset_seed, static_cast<std::uint64_t>(class_id), static_cast<std::uint64_t>(index));
}

int train_count(int count, double ratio) {
  return std::clamp(static_cast<int>(std::lround(count * ratio)), 1, count - 1);
}

DatasetManifest generate_dataset(const DatasetConfig& config, const std::filesystem::path& out_dir, int jobs) {
  config.validate();
  struct Job {
    ClipSpec spec;
    ManifestEntry entry;
  };
  std::vector<Job> work;
  for (int c = 0; c < kNumClasses; ++c) {
    const int n = config.counts[static_cast<std::size_t>(c)];
    // Stratified split: a seeded shuffle of this class's clip indices.
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) order[static_cast<std::size_t>(k)] = k;
    std::mt19937_64 rng(derive_seed(config.seed, 0x73706c6974, static_cast<std::uint64_t>(c)));
    std::shuffle(order.begin(), order.end(), rng);
    const int n_train = train_count(n, config.split_ratio);
    std::vector<Split> split_of(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
      split_of[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = k < n_train ? Split::train : Split::test;
    }
    for (int k = 0; k < n; ++k) {
      char name[32];
      std::snprintf(name, sizeof name, "clips/c%d_%03d.tscl", c, k);
      work.push_back({ClipSpec{c, clip_seed(config.seed, c, k), config.num_frames, config.height, config.width,
                               config.noise_level},
                      ManifestEntry{name, c, split_of[static_cast<std::size_t>(k)]}});
    }
  }
  parallel_for(work.size(), jobs, [&](std::size_t i) {
    save_clip(generate_clip(work[i].spec), out_dir / work[i].entry.path);
  });
  DatasetManifest m;
  m.seed = config.seed;
  m.config_hash = config.hash();
  m.root = out_dir;
  for (auto& w : work) m.entries.push_back(w.entry);
  write_manifest(m, out_dir / "manifest.tsv");
  return m;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ostringstream os;
  os << "# synthetic clip manifest\n# seed=" << manifest.seed << "\n# config_hash=" << manifest.config_hash << "\n";
  for (const auto& e : manifest.entries) os << e.path << '\t' << e.label << '\t' << split_name(e.split) << '\n';
  io::write_text_file(path, os.str());
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  DatasetManifest m;
  m.root = path.parent_path();
  std::istringstream in(io::read_text_file(path));
  std::string line;
  int line_no = 0;
  auto bad = [&](const std::string& why) {
    throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("# seed=", 0) == 0) m.seed = std::stoull(line.substr(7));
      if (line.rfind("# config_hash=", 0) == 0) m.config_hash = line.substr(14);
      continue;
    }
    std::istringstream fields(line);
    std::string p, label, split;
    if (!std::getline(fields, p, '\t') || !std::getline(fields, label, '\t') || !std::getline(fields, split)) {
      bad("expected path<TAB>label<TAB>split");
    }
    ManifestEntry e;
    e.path = p;
    try {
      std::size_t used = 0;
      e.label = std::stoi(label, &used);
      if (used != label.size()) bad("bad label '" + label + "'");
    } catch (const std::logic_error&) {
      bad("bad label '" + label + "'");
    }
    if (e.label < 0 || e.label >= kNumClasses) bad("label out of range");
    if (split == "train") e.split = Split::train;
    else if (split == "test") e.split = Split::test;
    else bad("unknown split '" + split + "'");
    if (!std::filesystem::exists(m.resolve(e))) bad("missing clip " + m.resolve(e).string());
    m.entries.push_back(std::move(e));
  }
  return m;
}

}  // namespace tsf
