#pragma once

#include <string>
#include <vector>

#include "snnsir/blocks.hpp"
#include "snnsir/network.hpp"
#include "snnsir/tensor.hpp"

namespace snnsir {

struct SceneSpec {
  uint64_t seed = 0;
  int64_t height = 64;
  int64_t width = 64;
  int disparity_range = 6;  // max horizontal shift in pixels; must stay < W/4
  int depth_layers = 3;
  int noise_octaves = 3;
  int rect_count = 4;
  double sensor_noise = 0.0;  // per-view independent Gaussian sigma

  void validate() const;
};

struct DegradationSpec {
  Task kind = Task::Raindrop;
  uint64_t seed = 0;
  // rain streaks
  int streak_count = 40;
  double streak_length = 12.0;
  double streak_angle_lo = 70.0;  // degrees from horizontal
  double streak_angle_hi = 110.0;
  double streak_intensity = 0.5;
  // raindrops
  int drop_count = 12;
  double drop_radius_lo = 2.0;
  double drop_radius_hi = 5.0;
  double drop_blur = 1.5;
  // low light: out = (gain * in)^gamma + noise
  double lowlight_gamma = 2.2;
  double lowlight_gain = 0.25;
  double lowlight_noise = 0.01;
  // downsample (super-resolution inputs)
  int downsample_scale = 2;

  void validate() const;
};

/// A generated stereo scene: clean views plus the per-pixel disparity field
/// of the left view (the weather warp reuses it).
struct Scene {
  StereoPair clean;                // [3,H,W] each, values in [0,1]
  std::vector<double> disparity;   // H*W, pixels
  int64_t height = 0, width = 0;
};

Scene generate_scene(const SceneSpec& spec);

/// Horizontal warp of a left-view plane into the right view using the scene
/// disparity field: larger shifts win overlaps, holes take the nearest
/// written value in the row.
std::vector<double> warp_to_right(const std::vector<double>& plane, int64_t h, int64_t w,
                                  const std::vector<double>& disparity);

struct DegradedPair {
  StereoPair degraded;
  // Weather fields actually applied per view (empty for lowlight/downsample).
  std::vector<double> mask_left, mask_right;
};

DegradedPair degrade(const Scene& scene, const DegradationSpec& spec);

struct ManifestEntry {
  std::string clean_left, clean_right, degraded_left, degraded_right;
  std::string split;  // train / val / test
  SceneSpec scene;
  DegradationSpec degradation;
};

struct Manifest {
  std::vector<ManifestEntry> entries;

  void save(const std::string& path) const;
  static Manifest load(const std::string& path);
  std::vector<const ManifestEntry*> split(const std::string& name) const;
};

/// Deterministic split assignment by index, 10:1:1 train:val:test.
std::string split_for_index(int64_t index, int64_t count);

/// Generates `count` scene/degradation pairs under out_dir/images and writes
/// out_dir/manifest.jsonl. Returns the manifest.
Manifest generate_dataset(const std::string& out_dir, Task task, int64_t count,
                          int64_t size, uint64_t seed);

}  // namespace snnsir
