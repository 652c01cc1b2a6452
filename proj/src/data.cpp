#include "snnsir/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "snnsir/image_io.hpp"

namespace snnsir {

namespace fs = std::filesystem;
using nlohmann::json;

void SceneSpec::validate() const {
  if (height < 8 || width < 8) throw ConfigError("scene: size too small");
  if (disparity_range < 0 || disparity_range >= width / 4) {
    throw ConfigError("scene: disparity_range must be in [0, W/4)");
  }
  if (depth_layers < 1) throw ConfigError("scene: depth_layers must be >= 1");
}

void DegradationSpec::validate() const {
  if (streak_count < 0 || drop_count < 0) throw ConfigError("degrade: negative count");
  if (!(lowlight_gamma >= 1.0)) throw ConfigError("degrade: gamma must be >= 1");
  if (!(lowlight_gain > 0.0 && lowlight_gain <= 1.0)) {
    throw ConfigError("degrade: gain must be in (0,1]");
  }
  if (kind == Task::Superres && downsample_scale != 1 && downsample_scale != 2 &&
      downsample_scale != 4) {
    throw ConfigError("degrade: downsample scale must be 1, 2 or 4");
  }
}

namespace {

// Bilinear value noise summed over octaves, normalized into [0,1].
std::vector<double> octave_noise(Rng& rng, int64_t h, int64_t w, int octaves) {
  std::vector<double> out(static_cast<size_t>(h * w), 0.0);
  double amp = 1.0, total_amp = 0.0;
  for (int o = 0; o < octaves; ++o) {
    const int64_t cells = int64_t{2} << o;  // 2, 4, 8, ...
    std::vector<double> grid(static_cast<size_t>((cells + 1) * (cells + 1)));
    for (double& v : grid) v = rng.uniform();
    for (int64_t y = 0; y < h; ++y) {
      const double fy = static_cast<double>(y) / static_cast<double>(h) * cells;
      const int64_t gy = std::min<int64_t>(static_cast<int64_t>(fy), cells - 1);
      const double ty = fy - gy;
      for (int64_t x = 0; x < w; ++x) {
        const double fx = static_cast<double>(x) / static_cast<double>(w) * cells;
        const int64_t gx = std::min<int64_t>(static_cast<int64_t>(fx), cells - 1);
        const double tx = fx - gx;
        const double v00 = grid[gy * (cells + 1) + gx];
        const double v01 = grid[gy * (cells + 1) + gx + 1];
        const double v10 = grid[(gy + 1) * (cells + 1) + gx];
        const double v11 = grid[(gy + 1) * (cells + 1) + gx + 1];
        const double v = (v00 * (1 - tx) + v01 * tx) * (1 - ty) +
                         (v10 * (1 - tx) + v11 * tx) * ty;
        out[y * w + x] += amp * v;
      }
    }
    total_amp += amp;
    amp *= 0.5;
  }
  for (double& v : out) v /= total_amp;
  return out;
}

std::vector<double> gaussian_blur_plane(const std::vector<double>& in, int64_t h,
                                        int64_t w, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(2.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  std::vector<double> tmp(in.size()), out(in.size());
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int64_t xx = std::clamp<int64_t>(x + i, 0, w - 1);
        acc += k[i + radius] * in[y * w + xx];
      }
      tmp[y * w + x] = acc;
    }
  }
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int64_t yy = std::clamp<int64_t>(y + i, 0, h - 1);
        acc += k[i + radius] * tmp[yy * w + x];
      }
      out[y * w + x] = acc;
    }
  }
  return out;
}

}  // namespace

std::vector<double> warp_to_right(const std::vector<double>& plane, int64_t h, int64_t w,
                                  const std::vector<double>& disparity) {
  if (plane.size() != static_cast<size_t>(h * w) || disparity.size() != plane.size()) {
    throw ShapeError("warp_to_right: plane/disparity size mismatch");
  }
  std::vector<double> out(plane.size(), 0.0);
  std::vector<double> depth(plane.size(), -1.0);  // disparity that wrote each pixel
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      const double d = disparity[y * w + x];
      const int64_t xd = x - static_cast<int64_t>(std::llround(d));
      if (xd < 0 || xd >= w) continue;
      if (d > depth[y * w + xd]) {  // nearer layers overwrite
        depth[y * w + xd] = d;
        out[y * w + xd] = plane[y * w + x];
      }
    }
    // nearest fill for occlusion holes, left-to-right then right-to-left
    for (int64_t x = 1; x < w; ++x) {
      if (depth[y * w + x] < 0 && depth[y * w + x - 1] >= 0) {
        out[y * w + x] = out[y * w + x - 1];
        depth[y * w + x] = 0.0;
      }
    }
    for (int64_t x = w - 2; x >= 0; --x) {
      if (depth[y * w + x] < 0 && depth[y * w + x + 1] >= 0) {
        out[y * w + x] = out[y * w + x + 1];
        depth[y * w + x] = 0.0;
      }
    }
  }
  return out;
}

Scene generate_scene(const SceneSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const int64_t h = spec.height, w = spec.width;

  Scene scene;
  scene.height = h;
  scene.width = w;
  scene.disparity.assign(static_cast<size_t>(h * w), 0.0);

  // Background: tinted octave noise plus a soft vertical gradient.
  std::vector<std::vector<double>> left(3, std::vector<double>(h * w));
  const double tint[3] = {rng.uniform(0.3, 0.9), rng.uniform(0.3, 0.9),
                          rng.uniform(0.3, 0.9)};
  const auto noise = octave_noise(rng, h, w, spec.noise_octaves);
  const double grad_amp = rng.uniform(0.0, 0.3);
  for (int64_t y = 0; y < h; ++y) {
    const double g = grad_amp * static_cast<double>(y) / static_cast<double>(h);
    for (int64_t x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        left[c][y * w + x] = std::clamp(tint[c] * noise[y * w + x] + g, 0.0, 1.0);
      }
    }
  }

  // Depth layers: background at disparity 0 (or the full range for a single
  // layer), foreground rectangles at increasing shifts.
  std::vector<double> layer_disp(spec.depth_layers);
  if (spec.depth_layers == 1) {
    layer_disp[0] = spec.disparity_range;
    std::fill(scene.disparity.begin(), scene.disparity.end(),
              static_cast<double>(spec.disparity_range));
  } else {
    for (int k = 0; k < spec.depth_layers; ++k) {
      layer_disp[k] = std::llround(static_cast<double>(spec.disparity_range) * k /
                                   (spec.depth_layers - 1));
    }
  }
  for (int r = 0; r < spec.rect_count && spec.depth_layers > 1; ++r) {
    const int layer = 1 + static_cast<int>(rng.below(spec.depth_layers - 1));
    const int64_t rw = 4 + static_cast<int64_t>(rng.below(w / 3));
    const int64_t rh = 4 + static_cast<int64_t>(rng.below(h / 3));
    const int64_t x0 = rng.below(w - rw);
    const int64_t y0 = rng.below(h - rh);
    const double col[3] = {rng.uniform(), rng.uniform(), rng.uniform()};
    const double blend = rng.uniform(0.5, 1.0);
    for (int64_t y = y0; y < y0 + rh; ++y) {
      for (int64_t x = x0; x < x0 + rw; ++x) {
        for (int c = 0; c < 3; ++c) {
          left[c][y * w + x] =
              std::clamp((1 - blend) * left[c][y * w + x] + blend * col[c] * noise[y * w + x],
                         0.0, 1.0);
        }
        scene.disparity[y * w + x] =
            std::max(scene.disparity[y * w + x], layer_disp[layer]);
      }
    }
  }

  std::vector<double> data_l, data_r;
  data_l.reserve(3 * h * w);
  data_r.reserve(3 * h * w);
  for (int c = 0; c < 3; ++c) {
    auto right = warp_to_right(left[c], h, w, scene.disparity);
    data_l.insert(data_l.end(), left[c].begin(), left[c].end());
    data_r.insert(data_r.end(), right.begin(), right.end());
  }
  if (spec.sensor_noise > 0.0) {
    for (double& v : data_l) v = std::clamp(v + spec.sensor_noise * rng.normal(), 0.0, 1.0);
    for (double& v : data_r) v = std::clamp(v + spec.sensor_noise * rng.normal(), 0.0, 1.0);
  }
  scene.clean.left = Tensor::from_vector({3, h, w}, std::move(data_l));
  scene.clean.right = Tensor::from_vector({3, h, w}, std::move(data_r));
  return scene;
}

namespace {

void splat(std::vector<double>& mask, int64_t h, int64_t w, double fy, double fx,
           double v) {
  const int64_t y0 = static_cast<int64_t>(std::floor(fy));
  const int64_t x0 = static_cast<int64_t>(std::floor(fx));
  const double ty = fy - y0, tx = fx - x0;
  const double wts[2][2] = {{(1 - ty) * (1 - tx), (1 - ty) * tx},
                            {ty * (1 - tx), ty * tx}};
  for (int dy = 0; dy < 2; ++dy) {
    for (int dx = 0; dx < 2; ++dx) {
      const int64_t y = y0 + dy, x = x0 + dx;
      if (y >= 0 && y < h && x >= 0 && x < w) {
        mask[y * w + x] = std::min(1.0, mask[y * w + x] + v * wts[dy][dx]);
      }
    }
  }
}

std::vector<double> streak_mask(Rng& rng, const DegradationSpec& spec, int64_t h,
                                int64_t w) {
  std::vector<double> mask(static_cast<size_t>(h * w), 0.0);
  constexpr double kDeg = 3.141592653589793 / 180.0;
  for (int s = 0; s < spec.streak_count; ++s) {
    const double cx = rng.uniform(0.0, static_cast<double>(w));
    const double cy = rng.uniform(0.0, static_cast<double>(h));
    const double angle = rng.uniform(spec.streak_angle_lo, spec.streak_angle_hi) * kDeg;
    const double len = spec.streak_length * rng.uniform(0.6, 1.4);
    const double vx = std::cos(angle), vy = std::sin(angle);
    const double strength = spec.streak_intensity * rng.uniform(0.6, 1.0);
    const int steps = std::max(2, static_cast<int>(std::ceil(len * 2)));
    for (int i = 0; i < steps; ++i) {
      const double t = len * (static_cast<double>(i) / (steps - 1) - 0.5);
      splat(mask, h, w, cy + vy * t, cx + vx * t, strength);
    }
  }
  return mask;
}

std::vector<double> drop_mask(Rng& rng, const DegradationSpec& spec, int64_t h,
                              int64_t w) {
  std::vector<double> mask(static_cast<size_t>(h * w), 0.0);
  for (int d = 0; d < spec.drop_count; ++d) {
    const double cx = rng.uniform(0.0, static_cast<double>(w));
    const double cy = rng.uniform(0.0, static_cast<double>(h));
    const double radius = rng.uniform(spec.drop_radius_lo, spec.drop_radius_hi);
    const int64_t reach = static_cast<int64_t>(std::ceil(radius * 2.5));
    for (int64_t y = std::max<int64_t>(0, static_cast<int64_t>(cy) - reach);
         y < std::min<int64_t>(h, static_cast<int64_t>(cy) + reach + 1); ++y) {
      for (int64_t x = std::max<int64_t>(0, static_cast<int64_t>(cx) - reach);
           x < std::min<int64_t>(w, static_cast<int64_t>(cx) + reach + 1); ++x) {
        const double r2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
        const double a = std::exp(-r2 / (2.0 * radius * radius / 2.25));
        mask[y * w + x] = std::min(1.0, mask[y * w + x] + a);
      }
    }
  }
  return mask;
}

std::vector<double> plane_of(const Tensor& img, int c) {
  const int64_t h = img.dim(1), w = img.dim(2);
  const auto d = img.data();
  return std::vector<double>(d.begin() + c * h * w, d.begin() + (c + 1) * h * w);
}

}  // namespace

DegradedPair degrade(const Scene& scene, const DegradationSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const int64_t h = scene.height, w = scene.width;
  DegradedPair out;

  switch (spec.kind) {
    case Task::Rainstreak:
    case Task::Raindrop: {
      const bool drops = spec.kind == Task::Raindrop;
      out.mask_left = drops ? drop_mask(rng, spec, h, w) : streak_mask(rng, spec, h, w);
      out.mask_right = warp_to_right(out.mask_left, h, w, scene.disparity);
      auto apply = [&](const Tensor& img, const std::vector<double>& mask) {
        std::vector<double> data;
        data.reserve(3 * h * w);
        for (int c = 0; c < 3; ++c) {
          auto plane = plane_of(img, c);
          std::vector<double> result(plane.size());
          if (drops) {
            const auto blurred = gaussian_blur_plane(plane, h, w, spec.drop_blur);
            for (size_t i = 0; i < plane.size(); ++i) {
              const double m = mask[i];
              result[i] = std::clamp(
                  (1.0 - m) * plane[i] + m * (0.85 * blurred[i] + 0.15), 0.0, 1.0);
            }
          } else {
            for (size_t i = 0; i < plane.size(); ++i) {
              const double m = mask[i];
              result[i] = std::clamp((1.0 - m) * plane[i] + m * 0.9, 0.0, 1.0);
            }
          }
          data.insert(data.end(), result.begin(), result.end());
        }
        return Tensor::from_vector({3, h, w}, std::move(data));
      };
      out.degraded.left = apply(scene.clean.left, out.mask_left);
      out.degraded.right = apply(scene.clean.right, out.mask_right);
      break;
    }
    case Task::Lowlight: {
      auto apply = [&](const Tensor& img) {
        std::vector<double> data(img.data().begin(), img.data().end());
        for (double& v : data) {
          v = std::pow(spec.lowlight_gain * v, spec.lowlight_gamma);
          if (spec.lowlight_noise > 0.0) v += spec.lowlight_noise * rng.normal();
          v = std::clamp(v, 0.0, 1.0);
        }
        return Tensor::from_vector({3, h, w}, std::move(data));
      };
      out.degraded.left = apply(scene.clean.left);
      out.degraded.right = apply(scene.clean.right);
      break;
    }
    case Task::Superres: {
      const int s = spec.downsample_scale;
      auto shrink = [&](const Tensor& img) {
        Tensor batched = reshape(img, {1, 3, h, w});
        Tensor small = bicubic_resize(batched, h / s, w / s);
        std::vector<double> data(small.data().begin(), small.data().end());
        for (double& v : data) v = std::clamp(v, 0.0, 1.0);
        return Tensor::from_vector({3, h / s, w / s}, std::move(data));
      };
      out.degraded.left = shrink(scene.clean.left);
      out.degraded.right = shrink(scene.clean.right);
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

namespace {

json scene_to_json(const SceneSpec& s) {
  return json{{"seed", s.seed},           {"height", s.height},
              {"width", s.width},         {"disparity_range", s.disparity_range},
              {"depth_layers", s.depth_layers}, {"noise_octaves", s.noise_octaves},
              {"rect_count", s.rect_count},     {"sensor_noise", s.sensor_noise}};
}

SceneSpec scene_from_json(const json& j) {
  SceneSpec s;
  s.seed = j.at("seed").get<uint64_t>();
  s.height = j.at("height").get<int64_t>();
  s.width = j.at("width").get<int64_t>();
  s.disparity_range = j.at("disparity_range").get<int>();
  s.depth_layers = j.at("depth_layers").get<int>();
  s.noise_octaves = j.at("noise_octaves").get<int>();
  s.rect_count = j.at("rect_count").get<int>();
  s.sensor_noise = j.at("sensor_noise").get<double>();
  return s;
}

json degradation_to_json(const DegradationSpec& d) {
  return json{{"kind", task_name(d.kind)},
              {"seed", d.seed},
              {"streak_count", d.streak_count},
              {"streak_length", d.streak_length},
              {"streak_angle_lo", d.streak_angle_lo},
              {"streak_angle_hi", d.streak_angle_hi},
              {"streak_intensity", d.streak_intensity},
              {"drop_count", d.drop_count},
              {"drop_radius_lo", d.drop_radius_lo},
              {"drop_radius_hi", d.drop_radius_hi},
              {"drop_blur", d.drop_blur},
              {"lowlight_gamma", d.lowlight_gamma},
              {"lowlight_gain", d.lowlight_gain},
              {"lowlight_noise", d.lowlight_noise},
              {"downsample_scale", d.downsample_scale}};
}

DegradationSpec degradation_from_json(const json& j) {
  DegradationSpec d;
  d.kind = task_from_name(j.at("kind").get<std::string>());
  d.seed = j.at("seed").get<uint64_t>();
  d.streak_count = j.at("streak_count").get<int>();
  d.streak_length = j.at("streak_length").get<double>();
  d.streak_angle_lo = j.at("streak_angle_lo").get<double>();
  d.streak_angle_hi = j.at("streak_angle_hi").get<double>();
  d.streak_intensity = j.at("streak_intensity").get<double>();
  d.drop_count = j.at("drop_count").get<int>();
  d.drop_radius_lo = j.at("drop_radius_lo").get<double>();
  d.drop_radius_hi = j.at("drop_radius_hi").get<double>();
  d.drop_blur = j.at("drop_blur").get<double>();
  d.lowlight_gamma = j.at("lowlight_gamma").get<double>();
  d.lowlight_gain = j.at("lowlight_gain").get<double>();
  d.lowlight_noise = j.at("lowlight_noise").get<double>();
  d.downsample_scale = j.at("downsample_scale").get<int>();
  return d;
}

}  // namespace

void Manifest::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw IoError("manifest: cannot open '" + path + "' for writing");
  for (const auto& e : entries) {
    json j{{"clean_left", e.clean_left},
           {"clean_right", e.clean_right},
           {"degraded_left", e.degraded_left},
           {"degraded_right", e.degraded_right},
           {"split", e.split},
           {"scene", scene_to_json(e.scene)},
           {"degradation", degradation_to_json(e.degradation)}};
    os << j.dump() << "\n";
  }
  if (!os) throw IoError("manifest: write failed for '" + path + "'");
}

Manifest Manifest::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("manifest: cannot open '" + path + "'");
  const fs::path base = fs::path(path).parent_path();
  Manifest m;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
      ManifestEntry e;
      e.clean_left = j.at("clean_left").get<std::string>();
      e.clean_right = j.at("clean_right").get<std::string>();
      e.degraded_left = j.at("degraded_left").get<std::string>();
      e.degraded_right = j.at("degraded_right").get<std::string>();
      e.split = j.at("split").get<std::string>();
      e.scene = scene_from_json(j.at("scene"));
      e.degradation = degradation_from_json(j.at("degradation"));
      for (std::string* p : {&e.clean_left, &e.clean_right, &e.degraded_left,
                             &e.degraded_right}) {
        if (!fs::path(*p).is_absolute()) *p = (base / *p).string();
        if (!fs::exists(*p)) {
          throw IoError("manifest: referenced file missing: " + *p);
        }
      }
      m.entries.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw DecodeError("manifest: bad record at line " + std::to_string(line_no) +
                        ": " + ex.what());
    }
  }
  return m;
}

std::vector<const ManifestEntry*> Manifest::split(const std::string& name) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries) {
    if (name == "all" || e.split == name) out.push_back(&e);
  }
  return out;
}

std::string split_for_index(int64_t index, int64_t /*count*/) {
  const int64_t r = index % 12;
  if (r == 10) return "val";
  if (r == 11) return "test";
  return "train";
}

Manifest generate_dataset(const std::string& out_dir, Task task, int64_t count,
                          int64_t size, uint64_t seed) {
  fs::create_directories(fs::path(out_dir) / "images");
  Rng base(seed);
  Manifest manifest;
  for (int64_t i = 0; i < count; ++i) {
    SceneSpec scene_spec;
    scene_spec.seed = base.fork(2 * i).next_u64();
    scene_spec.height = size;
    scene_spec.width = size;
    scene_spec.disparity_range = std::min<int>(6, static_cast<int>(size / 4) - 1);
    DegradationSpec deg;
    deg.kind = task;
    deg.seed = base.fork(2 * i + 1).next_u64();

    Scene scene = generate_scene(scene_spec);
    DegradedPair deg_pair = degrade(scene, deg);

    char tag[32];
    std::snprintf(tag, sizeof(tag), "%04lld", static_cast<long long>(i));
    ManifestEntry e;
    e.clean_left = std::string("images/") + tag + "_clean_l.png";
    e.clean_right = std::string("images/") + tag + "_clean_r.png";
    e.degraded_left = std::string("images/") + tag + "_deg_l.png";
    e.degraded_right = std::string("images/") + tag + "_deg_r.png";
    e.split = split_for_index(i, count);
    e.scene = scene_spec;
    e.degradation = deg;

    save_png((fs::path(out_dir) / e.clean_left).string(), scene.clean.left);
    save_png((fs::path(out_dir) / e.clean_right).string(), scene.clean.right);
    save_png((fs::path(out_dir) / e.degraded_left).string(), deg_pair.degraded.left);
    save_png((fs::path(out_dir) / e.degraded_right).string(), deg_pair.degraded.right);
    manifest.entries.push_back(std::move(e));
  }
  manifest.save((fs::path(out_dir) / "manifest.jsonl").string());
  return manifest;
}

}  // namespace snnsir
