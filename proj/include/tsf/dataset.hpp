#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tsf/image.hpp"
#include "tsf/tensor.hpp"

namespace tsf {

inline constexpr int kNumClasses = 6;

enum class ShapeKind { disk = 0, square = 1, triangle = 2 };
enum class MotionKind { stationary = 0, oscillating = 1 };

// Class c renders shape c / 2 with motion c % 2.
ShapeKind class_shape(int class_id);
MotionKind class_motion(int class_id);
std::string class_name(int class_id);

struct ClipSpec {
  int class_id = 0;
  std::uint64_t seed = 0;
  int num_frames = 30;
  std::size_t height = 64;
  std::size_t width = 64;
  double noise_level = 0.02;

  // min_frames: shortest clip the caller can use (flow-stack length + 1).
  void validate(int min_frames = 2) const;
};

// Everything random about a clip, drawn from its seed. Drawn identically for
// every class so that only the class-dependent motion differs.
struct ClipScene {
  ShapeKind shape = ShapeKind::disk;
  MotionKind motion = MotionKind::stationary;
  double size = 8.0;  // disk radius; square half-side and triangle circumradius scale from it
  std::array<double, 3> color{};
  double cx = 32.0, cy = 32.0;  // oscillation centre, pixel coordinates (x = column)
  double amplitude = 10.0;      // pixels
  double period = 15.0;         // frames
  double phase = 0.0;           // radians
  Tensor<float> background;     // H x W x 3
};

ClipScene clip_scene(const ClipSpec& spec);

// Shape centre (x, y) in frame t. Stationary clips sit at the t = 0 position.
std::array<double, 2> shape_center(const ClipScene& scene, int t);

// Rendered clip, frames T x H x W x 3 in [0, 1].
struct VideoClip {
  Tensor<float> frames;
  int label = 0;
  ClipSpec spec;

  int num_frames() const { return static_cast<int>(frames.dim(0)); }
  std::size_t height() const { return frames.dim(1); }
  std::size_t width() const { return frames.dim(2); }
  Tensor<float> frame(int t) const;
  Image gray(int t) const;
};

VideoClip generate_clip(const ClipSpec& spec);

std::vector<std::uint8_t> encode_clip(const VideoClip& clip);
VideoClip decode_clip(std::span<const std::uint8_t> bytes);
void save_clip(const VideoClip& clip, const std::filesystem::path& path);
VideoClip load_clip(const std::filesystem::path& path);

enum class Split { train, test };
std::string split_name(Split s);

struct DatasetConfig {
  std::array<int, kNumClasses> counts{19, 17, 25, 26, 18, 20};
  double split_ratio = 715.0 / 1237.0;  // train fraction
  std::uint64_t seed = 1;
  int num_frames = 30;
  std::size_t height = 64;
  std::size_t width = 64;
  double noise_level = 0.02;

  void validate() const;
  // Canonical key = value text; its SHA-256 is the config hash.
  std::string canonical() const;
  std::string hash() const;
};

struct ManifestEntry {
  std::string path;  // relative to the manifest's directory
  int label = 0;
  Split split = Split::train;
  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::filesystem::path root;  // directory holding the manifest

  std::array<std::array<int, 2>, kNumClasses> class_counts() const;  // (train, test)
  std::vector<ManifestEntry> split(Split s) const;
  std::filesystem::path resolve(const ManifestEntry& e) const { return root / e.path; }
};

// Seed of the index-th clip of a class under a dataset seed.
std::uint64_t clip_seed(std::uint64_t dataset_seed, int class_id, int index);

// Number of training clips for a class of `count` clips.
int train_count(int count, double ratio);

// Renders every clip under out_dir/clips and writes out_dir/manifest.tsv.
// `jobs` worker threads render in parallel; output is independent of jobs.
DatasetManifest generate_dataset(const DatasetConfig& config, const std::filesystem::path& out_dir, int jobs = 1);

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
// Checks that every referenced clip exists.
DatasetManifest read_manifest(const std::filesystem::path& path);

}  // namespace tsf
