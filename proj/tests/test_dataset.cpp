#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "test_util.hpp"
#include "tsf/binary_io.hpp"
#include "tsf/dataset.hpp"
#include "tsf/errors.hpp"

using namespace tsf;
using tsf::testing::TempDir;

namespace {

// Coverage-weighted centroid of the shape in frame t of a noise-free clip,
// recovered from pixels alone using the known background and shape colour.
std::array<double, 2> rendered_centroid(const VideoClip& clip, const ClipScene& scene, int t) {
  // Use the channel with the largest shape/background contrast.
  const auto frame = clip.frame(t);
  double sx = 0.0, sy = 0.0, total = 0.0;
  for (std::size_t i = 0; i < clip.height(); ++i)
    for (std::size_t j = 0; j < clip.width(); ++j) {
      double best_alpha = 0.0, best_contrast = 0.0;
      for (std::size_t c = 0; c < 3; ++c) {
        const double bg = scene.background.at(i, j, c);
        const double contrast = scene.color[c] - bg;
        if (std::abs(contrast) > std::abs(best_contrast)) {
          best_contrast = contrast;
          best_alpha = (frame.at(i, j, c) - bg) / contrast;
        }
      }
      sx += best_alpha * static_cast<double>(j);
      sy += best_alpha * static_cast<double>(i);
      total += best_alpha;
    }
  return {sx / total, sy / total};
}

}  // namespace

TEST(Clip, SameSpecIsBitIdentical) {
  const ClipSpec spec{3, 99, 12, 64, 64, 0.02};
  EXPECT_EQ(encode_clip(generate_clip(spec)), encode_clip(generate_clip(spec)));
  auto other = spec;
  other.seed = 100;
  EXPECT_NE(generate_clip(other).frames, generate_clip(spec).frames);
}

TEST(Clip, ValuesInUnitRangeAndDims) {
  const auto clip = generate_clip({4, 7, 10, 48, 40, 0.2});
  EXPECT_EQ(clip.frames.dims(), (Dims{10, 48, 40, 3}));
  EXPECT_EQ(clip.label, 4);
  for (float x : clip.frames.data()) {
    EXPECT_GE(x, 0.0f);
    EXPECT_LE(x, 1.0f);
  }
}

TEST(Clip, StationaryFramesDifferOnlyByNoise) {
  for (int c : {0, 2, 4}) {
    const ClipSpec clean{c, 11, 8, 64, 64, 0.0};
    const auto clip = generate_clip(clean);
    for (int t = 1; t < 8; ++t) EXPECT_EQ(clip.frame(t), clip.frame(0));
    const auto scene = clip_scene(clean);
    for (int t = 0; t < 8; ++t) EXPECT_EQ(shape_center(scene, t), shape_center(scene, 0));

    auto noisy = clean;
    noisy.noise_level = 0.02;
    const auto nclip = generate_clip(noisy);
    double sq = 0.0;
    for (std::size_t k = 0; k < clip.frames.size(); ++k) {
      const double d = nclip.frames[k] - clip.frames[k];
      sq += d * d;
    }
    // Residual is the (slightly clamped) noise itself.
    EXPECT_NEAR(std::sqrt(sq / static_cast<double>(clip.frames.size())), 0.02, 0.002);
  }
}

TEST(Clip, OscillatingCentroidFollowsSinusoid) {
  for (int c : {1, 3, 5}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const ClipSpec spec{c, seed, 30, 64, 64, 0.0};
      const auto clip = generate_clip(spec);
      const auto scene = clip_scene(spec);
      ASSERT_GE(scene.amplitude, 8.0);
      ASSERT_LE(scene.amplitude, 12.0);
      ASSERT_GE(scene.period, 10.0);
      ASSERT_LE(scene.period, 20.0);
      for (int t = 0; t < 30; ++t) {
        const double x = scene.cx + scene.amplitude * std::sin(2 * std::numbers::pi * t / scene.period + scene.phase);
        const auto got = rendered_centroid(clip, scene, t);
        EXPECT_NEAR(got[0], x, 0.5) << "class " << c << " t " << t;
        EXPECT_NEAR(got[1], scene.cy, 0.5);
      }
    }
  }
}

TEST(Clip, MotionPeakIsAtLeastTwoPixelsPerFrame) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto scene = clip_scene({1, seed});
    double peak = 0.0;
    for (int t = 0; t + 1 < 30; ++t) peak = std::max(peak, std::abs(shape_center(scene, t + 1)[0] - shape_center(scene, t)[0]));
    EXPECT_GE(peak, 2.0);
  }
}

TEST(Clip, SceneDrawsDoNotDependOnMotionClass) {
  // Same seed, same shape, different motion: identical appearance parameters,
  // and the stationary position equals the oscillating clip's first frame.
  const auto still = clip_scene({2, 5});
  const auto moving = clip_scene({3, 5});
  EXPECT_EQ(still.size, moving.size);
  EXPECT_EQ(still.color, moving.color);
  EXPECT_EQ(still.background, moving.background);
  EXPECT_EQ(shape_center(still, 17), shape_center(moving, 0));
}

TEST(Clip, SpecValidation) {
  EXPECT_THROW(ClipSpec{6}.validate(), InputError);
  EXPECT_THROW((ClipSpec{0, 0, 5}.validate(11)), InputError);
  EXPECT_THROW((ClipSpec{0, 0, 30, 16, 64}.validate()), InputError);
  EXPECT_NO_THROW((ClipSpec{0, 0, 11}.validate(11)));
}

TEST(ClipFile, RoundTripIsBitExact) {
  TempDir dir("clip");
  const auto clip = generate_clip({5, 3, 6, 32, 48, 0.05});
  save_clip(clip, dir / "a.tscl");
  const auto back = load_clip(dir / "a.tscl");
  EXPECT_EQ(back.frames, clip.frames);
  EXPECT_EQ(back.label, clip.label);
  EXPECT_EQ(encode_clip(back), encode_clip(clip));
}

TEST(ClipFile, RejectsCorruption) {
  const auto bytes = encode_clip(generate_clip({1, 3, 3, 32, 32, 0.0}));
  auto bad = bytes;
  bad[0] = 'x';
  EXPECT_THROW(decode_clip(bad), FormatError);
  bad = bytes;
  bad.resize(bytes.size() - 4);
  try {
    decode_clip(bad);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 28u);
  }
  bad = bytes;
  bad[20] = 4;  // channels
  EXPECT_THROW(decode_clip(bad), FormatError);
  bad = bytes;
  bad[24] = 9;  // label
  EXPECT_THROW(decode_clip(bad), FormatError);
  EXPECT_THROW(load_clip("/nonexistent/clip.tscl"), DataError);
}

TEST(Split, TenPerClassAtSixTenths) {
  EXPECT_EQ(train_count(10, 0.6), 6);
  TempDir dir("split");
  DatasetConfig cfg;
  cfg.counts = {10, 10, 10, 10, 10, 10};
  cfg.split_ratio = 0.6;
  cfg.num_frames = 2;
  cfg.height = cfg.width = 32;
  const auto m = generate_dataset(cfg, dir.path(), 2);
  for (const auto& [train, test] : m.class_counts()) {
    EXPECT_EQ(train, 6);
    EXPECT_EQ(test, 4);
  }
}

TEST(Split, DefaultCountsFollowTrainFraction) {
  const DatasetConfig cfg;
  int total = 0, train = 0;
  for (int n : cfg.counts) {
    const int k = train_count(n, cfg.split_ratio);
    EXPECT_LE(std::abs(k - n * 715.0 / 1237.0), 1.0);
    total += n;
    train += k;
  }
  EXPECT_EQ(total, 125);
  EXPECT_NEAR(static_cast<double>(train) / total, 715.0 / 1237.0, 0.01);
}

TEST(Dataset, SameSeedSameBytesAndManifest) {
  TempDir a("ds_a"), b("ds_b");
  DatasetConfig cfg;
  cfg.counts = {2, 3, 2, 2, 3, 2};
  cfg.num_frames = 3;
  cfg.height = cfg.width = 32;
  const auto ma = generate_dataset(cfg, a.path(), 1);
  const auto mb = generate_dataset(cfg, b.path(), 3);
  ASSERT_EQ(ma.entries, mb.entries);
  EXPECT_EQ(io::read_file(a / "manifest.tsv"), io::read_file(b / "manifest.tsv"));
  for (const auto& e : ma.entries) EXPECT_EQ(io::read_file(ma.resolve(e)), io::read_file(mb.resolve(e)));

  const auto back = read_manifest(a / "manifest.tsv");
  EXPECT_EQ(back.entries, ma.entries);
  EXPECT_EQ(back.seed, cfg.seed);
  EXPECT_EQ(back.config_hash, cfg.hash());
  EXPECT_EQ(load_clip(back.resolve(back.entries[4])).label, back.entries[4].label);
}

TEST(Dataset, ManifestErrors) {
  TempDir dir("manifest");
  io::write_text_file(dir / "m.tsv", "clips/none.tscl\t1\ttrain\n");
  EXPECT_THROW(read_manifest(dir / "m.tsv"), DataError);
  save_clip(generate_clip({0, 1, 2, 32, 32, 0.0}), dir / "x.tscl");
  io::write_text_file(dir / "m.tsv", "x.tscl\t7\ttrain\n");
  EXPECT_THROW(read_manifest(dir / "m.tsv"), DataError);
  io::write_text_file(dir / "m.tsv", "x.tscl\t1\tvalidation\n");
  EXPECT_THROW(read_manifest(dir / "m.tsv"), DataError);
  io::write_text_file(dir / "m.tsv", "# comment\nx.tscl\t1\ttest\n");
  EXPECT_EQ(read_manifest(dir / "m.tsv").entries.size(), 1u);
  DatasetConfig bad;
  bad.counts[2] = 1;
  EXPECT_THROW(generate_dataset(bad, dir.path()), InputError);
}
