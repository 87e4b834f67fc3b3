#include "socs/scene_synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include <Eigen/Dense>

#include "socs/error.hpp"
#include "socs/rng.hpp"

namespace socs {
namespace {

Range parse_range(const KeyValueConfig& kv, const std::string& key, Range fallback) {
  if (!kv.has(key)) return fallback;
  const auto v = kv.get_doubles(key);
  if (v.size() == 1) return {v[0], v[0]};
  if (v.size() == 2) return {v[0], v[1]};
  throw ConfigError(kv.source() + ": key '" + key + "' expects 'lo, hi' or a single value");
}

std::string range_text(const Range& r) { return format_doubles({r.lo, r.hi}); }

void check_range(const Range& r, const std::string& name, bool allow_negative = true) {
  if (!(std::isfinite(r.lo) && std::isfinite(r.hi)) || r.lo > r.hi) {
    throw ConfigError(name + ": invalid range [" + format_double(r.lo) + ", " + format_double(r.hi) + "]");
  }
  if (!allow_negative && r.lo < 0.0) throw ConfigError(name + ": range must be non-negative");
}

Rgb hsv_to_rgb(double h, double s, double v) {
  const double i = std::floor(h * 6.0);
  const double f = h * 6.0 - i;
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - f * s);
  const double t = v * (1.0 - (1.0 - f) * s);
  switch (static_cast<int>(i) % 6) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

struct BoxHit {
  double t = std::numeric_limits<double>::infinity();
  Eigen::Vector3d local;
};

// Ray against the object's box in its local frame: x along heading, footprint
// centered at the pose, z from 0 to height.
bool intersect_box(const SceneObject& obj, const Pose2& pose, const Eigen::Vector3d& origin,
                   const Eigen::Vector3d& dir, BoxHit& hit) {
  const double c = std::cos(-pose.heading);
  const double s = std::sin(-pose.heading);
  const double ox = origin.x() - pose.x;
  const double oy = origin.y() - pose.y;
  const Eigen::Vector3d o(c * ox - s * oy, s * ox + c * oy, origin.z());
  const Eigen::Vector3d d(c * dir.x() - s * dir.y(), s * dir.x() + c * dir.y(), dir.z());
  const Eigen::Vector3d lo(-obj.length / 2, -obj.width / 2, 0.0);
  const Eigen::Vector3d hi(obj.length / 2, obj.width / 2, obj.height);
  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-12) {
      if (o[a] < lo[a] || o[a] > hi[a]) return false;
      continue;
    }
    double t0 = (lo[a] - o[a]) / d[a];
    double t1 = (hi[a] - o[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return false;
  }
  constexpr double kNear = 1e-3;
  if (tmin <= kNear) return false;  // behind or straddling the camera: clipped
  hit.t = tmin;
  hit.local = o + tmin * d;
  return true;
}

bool on_window_band(const SceneObject& obj, const Eigen::Vector3d& p) {
  if (p.z() < 0.55 * obj.height || p.z() > 0.85 * obj.height) return false;
  return std::abs(p.y()) < 0.4 * obj.width || std::abs(p.x()) < 0.35 * obj.length;
}

}  // namespace

void validate(const SceneConfig& c) {
  if (c.num_cameras < 1) throw ConfigError("num_cameras must be >= 1, got " + std::to_string(c.num_cameras));
  if (static_cast<int>(c.camera_yaw_offsets.size()) != c.num_cameras) {
    throw ConfigError("camera_yaw_offsets has " + std::to_string(c.camera_yaw_offsets.size()) + " entries for " +
                      std::to_string(c.num_cameras) + " cameras");
  }
  if (c.frames < 2) throw ConfigError("frames must be >= 2, got " + std::to_string(c.frames));
  if (c.waypoint_count < 1) throw ConfigError("waypoint_count must be >= 1");
  if (c.image_height < 1 || c.image_width < 1) throw ConfigError("image_size must be positive");
  if (!(c.frame_rate > 0.0) || !(c.waypoint_rate > 0.0)) throw ConfigError("frame_rate and waypoint_rate must be > 0");
  if (!(c.world_extent > 0.0)) throw ConfigError("world_extent must be > 0");
  if (c.background_palette.size() < 2) throw ConfigError("background_palette needs a sky and at least one ground color");
  for (const auto& rgb : c.background_palette) {
    for (double v : rgb) {
      if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("background_palette values must lie in [0, 1]");
    }
  }
  check_range(c.num_objects, "num_objects", false);
  if (c.num_objects.lo != std::floor(c.num_objects.lo) || c.num_objects.hi != std::floor(c.num_objects.hi)) {
    throw ConfigError("num_objects must be integral");
  }
  check_range(c.object_size_range, "object_size_range", false);
  if (!(c.object_size_range.lo > 0.0)) throw ConfigError("object_size_range must be positive");
  check_range(c.object_speed_range, "object_speed_range", false);
  check_range(c.object_turn_rate_range, "object_turn_rate_range");
  check_range(c.ego_speed_range, "ego_speed_range", false);
  check_range(c.ego_turn_rate_range, "ego_turn_rate_range");
  if (!(c.horizontal_fov > 0.0 && c.horizontal_fov < std::numbers::pi)) throw ConfigError("horizontal_fov out of range");
  if (!(c.camera_height > 0.0)) throw ConfigError("camera_height must be > 0");
  if (!(c.noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
}

SceneConfig scene_config_from(const KeyValueConfig& kv) {
  kv.require_known({"num_objects", "world_extent", "object_size_range", "object_speed_range", "object_turn_rate_range",
                    "ego_speed_range", "ego_turn_rate_range", "num_cameras", "camera_yaw_offsets", "image_size",
                    "frames", "frame_rate", "waypoint_count", "waypoint_rate", "background_palette", "seed",
                    "horizontal_fov", "camera_height", "camera_pitch", "noise_sigma", "two_tone"});
  SceneConfig c;
  c.num_objects = parse_range(kv, "num_objects", c.num_objects);
  c.world_extent = kv.get_double("world_extent", c.world_extent);
  c.object_size_range = parse_range(kv, "object_size_range", c.object_size_range);
  c.object_speed_range = parse_range(kv, "object_speed_range", c.object_speed_range);
  c.object_turn_rate_range = parse_range(kv, "object_turn_rate_range", c.object_turn_rate_range);
  c.ego_speed_range = parse_range(kv, "ego_speed_range", c.ego_speed_range);
  c.ego_turn_rate_range = parse_range(kv, "ego_turn_rate_range", c.ego_turn_rate_range);
  c.num_cameras = static_cast<int>(kv.get_int("num_cameras", c.num_cameras));
  if (kv.has("camera_yaw_offsets")) c.camera_yaw_offsets = kv.get_doubles("camera_yaw_offsets");
  if (kv.has("image_size")) {
    const auto s = kv.get_doubles("image_size");
    if (s.size() != 2) throw ConfigError(kv.source() + ": image_size expects 'H, W'");
    c.image_height = static_cast<int>(s[0]);
    c.image_width = static_cast<int>(s[1]);
  }
  c.frames = static_cast<int>(kv.get_int("frames", c.frames));
  c.frame_rate = kv.get_double("frame_rate", c.frame_rate);
  c.waypoint_count = static_cast<int>(kv.get_int("waypoint_count", c.waypoint_count));
  c.waypoint_rate = kv.get_double("waypoint_rate", c.waypoint_rate);
  if (kv.has("background_palette")) {
    c.background_palette.clear();
    for (const auto& t : kv.get_tuples("background_palette")) {
      if (t.size() != 3) throw ConfigError(kv.source() + ": background_palette entries must be r,g,b");
      c.background_palette.push_back({t[0], t[1], t[2]});
    }
  }
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(c.seed)));
  c.horizontal_fov = kv.get_double("horizontal_fov", c.horizontal_fov);
  c.camera_height = kv.get_double("camera_height", c.camera_height);
  c.camera_pitch = kv.get_double("camera_pitch", c.camera_pitch);
  c.noise_sigma = kv.get_double("noise_sigma", c.noise_sigma);
  c.two_tone = kv.get_bool("two_tone", c.two_tone);
  validate(c);
  return c;
}

KeyValueConfig to_key_values(const SceneConfig& c) {
  KeyValueConfig kv;
  kv.set("num_objects", range_text(c.num_objects));
  kv.set("world_extent", format_double(c.world_extent));
  kv.set("object_size_range", range_text(c.object_size_range));
  kv.set("object_speed_range", range_text(c.object_speed_range));
  kv.set("object_turn_rate_range", range_text(c.object_turn_rate_range));
  kv.set("ego_speed_range", range_text(c.ego_speed_range));
  kv.set("ego_turn_rate_range", range_text(c.ego_turn_rate_range));
  kv.set("num_cameras", std::to_string(c.num_cameras));
  kv.set("camera_yaw_offsets", format_doubles(c.camera_yaw_offsets));
  kv.set("image_size", std::to_string(c.image_height) + ", " + std::to_string(c.image_width));
  kv.set("frames", std::to_string(c.frames));
  kv.set("frame_rate", format_double(c.frame_rate));
  kv.set("waypoint_count", std::to_string(c.waypoint_count));
  kv.set("waypoint_rate", format_double(c.waypoint_rate));
  std::string palette;
  for (std::size_t i = 0; i < c.background_palette.size(); ++i) {
    if (i) palette += "; ";
    const auto& p = c.background_palette[i];
    palette += format_doubles({p[0], p[1], p[2]});
  }
  kv.set("background_palette", palette);
  kv.set("seed", std::to_string(c.seed));
  kv.set("horizontal_fov", format_double(c.horizontal_fov));
  kv.set("camera_height", format_double(c.camera_height));
  kv.set("camera_pitch", format_double(c.camera_pitch));
  kv.set("noise_sigma", format_double(c.noise_sigma));
  kv.set("two_tone", c.two_tone ? "true" : "false");
  return kv;
}

std::uint64_t config_hash(const SceneConfig& config) {
  SceneConfig c = config;
  c.seed = 0;
  return fnv1a64(to_key_values(c).to_text());
}

Pose2 unicycle_advance(const Pose2& start, double speed, double turn_rate, double dt) {
  double dx;
  double dy;
  if (std::abs(turn_rate) < 1e-12) {
    dx = speed * dt;
    dy = 0.0;
  } else {
    const double r = speed / turn_rate;
    dx = r * std::sin(turn_rate * dt);
    dy = r * (1.0 - std::cos(turn_rate * dt));
  }
  const double c = std::cos(start.heading);
  const double s = std::sin(start.heading);
  return {start.x + c * dx - s * dy, start.y + s * dx + c * dy, start.heading + turn_rate * dt};
}

Eigen::Matrix4d camera_to_world(const Pose2& ego, double yaw_offset, double height, double pitch) {
  const double psi = ego.heading + yaw_offset;
  const Eigen::Vector3d forward(std::cos(pitch) * std::cos(psi), std::cos(pitch) * std::sin(psi), -std::sin(pitch));
  const Eigen::Vector3d right(std::sin(psi), -std::cos(psi), 0.0);
  const Eigen::Vector3d down = forward.cross(right);
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.block<3, 1>(0, 0) = right;
  m.block<3, 1>(0, 1) = down;
  m.block<3, 1>(0, 2) = forward;
  m.block<3, 1>(0, 3) = Eigen::Vector3d(ego.x, ego.y, height);
  return m;
}

SceneSpec generate_scene(const SceneConfig& config, std::uint64_t seed) {
  validate(config);
  SceneSpec scene;
  scene.seed = seed;

  const double fx = (config.image_width / 2.0) / std::tan(config.horizontal_fov / 2.0);
  scene.intrinsics = {fx, fx, config.image_width / 2.0, config.image_height / 2.0};

  CounterRng ego_rng(seed, 0, "ego");
  const double ego_speed = ego_rng.uniform(config.ego_speed_range.lo, config.ego_speed_range.hi);
  const double ego_turn = ego_rng.uniform(config.ego_turn_rate_range.lo, config.ego_turn_rate_range.hi);

  for (int f = 0; f < config.frames; ++f) {
    const double t = f / config.frame_rate;
    scene.timestamps.push_back(t);
    scene.ego_poses.push_back(unicycle_advance({}, ego_speed, ego_turn, t));
  }
  const double t_last = scene.timestamps.back();
  for (int k = 1; k <= config.waypoint_count; ++k) {
    scene.future_ego_poses.push_back(unicycle_advance({}, ego_speed, ego_turn, t_last + k / config.waypoint_rate));
  }

  scene.camera_extrinsics.resize(static_cast<std::size_t>(config.num_cameras));
  for (int v = 0; v < config.num_cameras; ++v) {
    for (const auto& ego : scene.ego_poses) {
      scene.camera_extrinsics[static_cast<std::size_t>(v)].push_back(
          camera_to_world(ego, config.camera_yaw_offsets[static_cast<std::size_t>(v)], config.camera_height,
                          config.camera_pitch));
    }
  }

  double max_yaw = 0.0;
  for (double y : config.camera_yaw_offsets) max_yaw = std::max(max_yaw, std::abs(y));
  const double spread = max_yaw + 0.4 * config.horizontal_fov;
  const double near = 6.0;
  const double far = std::max(near + 1.0, 0.8 * config.world_extent);

  CounterRng count_rng(seed, 0, "object_count");
  const auto lo = static_cast<std::uint64_t>(config.num_objects.lo);
  const auto hi = static_cast<std::uint64_t>(config.num_objects.hi);
  const std::uint64_t n_objects = lo + count_rng.uniform_int(hi - lo + 1);

  for (std::uint64_t i = 0; i < n_objects; ++i) {
    CounterRng rng(seed, i, "object");
    SceneObject obj;
    obj.instance_id = static_cast<int>(i) + 1;
    obj.length = rng.uniform(config.object_size_range.lo, config.object_size_range.hi);
    obj.width = std::max(0.8, obj.length * rng.uniform(0.42, 0.6));
    obj.height = rng.uniform(1.3, 2.2);
    obj.body_color = hsv_to_rgb(rng.uniform(), rng.uniform(0.55, 0.95), rng.uniform(0.65, 0.95));
    obj.patch_color = obj.body_color;
    if (config.two_tone) {
      for (int c = 0; c < 3; ++c) obj.patch_color[static_cast<std::size_t>(c)] = 0.1 + 0.25 * obj.body_color[static_cast<std::size_t>(c)];
    }
    const double dist = rng.uniform(near, far);
    const double bearing = rng.uniform(-spread, spread);
    const Pose2 start{dist * std::cos(bearing), dist * std::sin(bearing), rng.uniform(0.0, 2.0 * std::numbers::pi)};
    const double speed = rng.uniform(config.object_speed_range.lo, config.object_speed_range.hi);
    const double turn = rng.uniform(config.object_turn_rate_range.lo, config.object_turn_rate_range.hi);
    for (double t : scene.timestamps) obj.poses.push_back(unicycle_advance(start, speed, turn, t));
    scene.objects.push_back(std::move(obj));
  }
  return scene;
}

RenderedView render_view(const SceneSpec& scene, const SceneConfig& config, int camera, int frame) {
  const int H = config.image_height;
  const int W = config.image_width;
  RenderedView out;
  out.rgb.assign(static_cast<std::size_t>(H) * W * 3, 0.0f);
  out.mask.assign(static_cast<std::size_t>(H) * W, 0);

  const Eigen::Matrix4d& c2w = scene.camera_extrinsics.at(static_cast<std::size_t>(camera)).at(static_cast<std::size_t>(frame));
  const Eigen::Matrix3d rot = c2w.topLeftCorner<3, 3>();
  const Eigen::Vector3d origin = c2w.block<3, 1>(0, 3);
  const auto& K = scene.intrinsics;
  const auto& palette = config.background_palette;
  const std::size_t ground_tiles = palette.size() - 1;

  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      const Eigen::Vector3d dir = rot * Eigen::Vector3d((c + 0.5 - K.cx) / K.fx, (r + 0.5 - K.cy) / K.fy, 1.0);
      double best_t = std::numeric_limits<double>::infinity();
      int best_id = 0;
      Rgb color = palette[0];
      if (dir.z() < -1e-12) {
        best_t = -origin.z() / dir.z();
        const Eigen::Vector3d p = origin + best_t * dir;
        const long long tile = static_cast<long long>(std::floor(p.x() / 2.0)) + static_cast<long long>(std::floor(p.y() / 2.0));
        const auto idx = static_cast<std::size_t>(((tile % static_cast<long long>(ground_tiles)) + static_cast<long long>(ground_tiles)) %
                                                  static_cast<long long>(ground_tiles));
        color = palette[1 + idx];
      }
      for (const auto& obj : scene.objects) {
        BoxHit hit;
        if (intersect_box(obj, obj.poses.at(static_cast<std::size_t>(frame)), origin, dir, hit) && hit.t < best_t) {
          best_t = hit.t;
          best_id = obj.instance_id;
          color = on_window_band(obj, hit.local) ? obj.patch_color : obj.body_color;
        }
      }
      const std::size_t px = static_cast<std::size_t>(r) * W + c;
      out.mask[px] = best_id;
      for (int ch = 0; ch < 3; ++ch) out.rgb[px * 3 + static_cast<std::size_t>(ch)] = static_cast<float>(color[static_cast<std::size_t>(ch)]);
    }
  }
  return out;
}

bool project_point(const SceneSpec& scene, int camera, int frame, const Eigen::Vector3d& world, double& u, double& v) {
  const Eigen::Matrix4d& c2w = scene.camera_extrinsics.at(static_cast<std::size_t>(camera)).at(static_cast<std::size_t>(frame));
  const Eigen::Vector3d p = c2w.topLeftCorner<3, 3>().transpose() * (world - c2w.block<3, 1>(0, 3));
  if (p.z() <= 1e-9) return false;
  u = scene.intrinsics.fx * p.x() / p.z() + scene.intrinsics.cx;
  v = scene.intrinsics.fy * p.y() / p.z() + scene.intrinsics.cy;
  return true;
}

SequenceRecord render_sequence(const SceneSpec& scene, const SceneConfig& config) {
  validate(config);
  const int V = config.num_cameras;
  const int F = config.frames;
  const int H = config.image_height;
  const int W = config.image_width;
  if (scene.camera_extrinsics.size() != static_cast<std::size_t>(V) || scene.timestamps.size() != static_cast<std::size_t>(F)) {
    throw ConfigError("scene does not match config (cameras or frame count differ)");
  }

  SequenceRecord rec;
  rec.frames = Tensor<float>({V, F, H, W, 3});
  rec.instance_masks = Tensor<std::int32_t>({V, F, H, W});
  rec.extrinsics = Tensor<double>({V, F, 4, 4});
  rec.intrinsics = Tensor<double>({V, 3, 3});
  rec.timestamps = Tensor<double>({F}, scene.timestamps);

  const std::size_t image = static_cast<std::size_t>(H) * W;
  for (int v = 0; v < V; ++v) {
    const auto& K = scene.intrinsics;
    const double kmat[9] = {K.fx, 0.0, K.cx, 0.0, K.fy, K.cy, 0.0, 0.0, 1.0};
    std::copy(kmat, kmat + 9, rec.intrinsics.data.begin() + 9 * v);
    for (int f = 0; f < F; ++f) {
      const std::size_t idx = static_cast<std::size_t>(v) * F + static_cast<std::size_t>(f);
      const Eigen::Matrix4d& m = scene.camera_extrinsics[static_cast<std::size_t>(v)][static_cast<std::size_t>(f)];
      for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) rec.extrinsics.data[idx * 16 + static_cast<std::size_t>(r * 4 + c)] = m(r, c);
      }
      const RenderedView view = render_view(scene, config, v, f);
      CounterRng noise(scene.seed, idx, "pixel_noise");
      float* rgb = rec.frames.data.data() + idx * image * 3;
      for (std::size_t i = 0; i < image * 3; ++i) {
        double val = view.rgb[i];
        if (config.noise_sigma > 0.0) val += config.noise_sigma * noise.normal();
        rgb[i] = static_cast<float>(std::clamp(val, 0.0, 1.0));
      }
      std::copy(view.mask.begin(), view.mask.end(), rec.instance_masks.data.begin() + static_cast<std::ptrdiff_t>(idx * image));
    }
  }
  rec.waypoints = compute_ego_waypoints(scene, config);
  rec.seed = static_cast<std::int64_t>(scene.seed);
  rec.config_hash = config_hash(config);
  return rec;
}

Tensor<double> compute_ego_waypoints(const SceneSpec& scene, const SceneConfig& config) {
  const auto needed = static_cast<std::size_t>(config.waypoint_count);
  if (scene.future_ego_poses.size() < needed) {
    throw GenerationError("ego trajectory covers " + std::to_string(scene.future_ego_poses.size()) + " of " +
                          std::to_string(needed) + " waypoint timestamps; extend the simulation horizon");
  }
  if (scene.ego_poses.empty()) throw GenerationError("scene has no ego poses");
  const Pose2& ref = scene.ego_poses.back();
  const double c = std::cos(ref.heading);
  const double s = std::sin(ref.heading);
  Tensor<double> out({config.waypoint_count, 2});
  for (std::size_t k = 0; k < needed; ++k) {
    const double dx = scene.future_ego_poses[k].x - ref.x;
    const double dy = scene.future_ego_poses[k].y - ref.y;
    out.data[2 * k] = c * dx + s * dy;
    out.data[2 * k + 1] = -s * dx + c * dy;
  }
  return out;
}

std::filesystem::path generate_dataset(const SceneConfig& config, std::size_t n_sequences,
                                       const std::filesystem::path& out_dir, std::uint64_t first_seed,
                                       const std::string& split) {
  validate(config);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create directory '" + out_dir.string() + "': " + ec.message());

  DatasetManifest manifest;
  manifest.config_hash = config_hash(config);
  manifest.split = split;
  manifest.base_dir = out_dir;
  for (std::size_t i = 0; i < n_sequences; ++i) {
    const std::uint64_t seed = first_seed + i;
    char name[64];
    std::snprintf(name, sizeof name, "seq_%06zu.socsrec", i);
    const SceneSpec scene = generate_scene(config, seed);
    write_record(render_sequence(scene, config), out_dir / name);
    manifest.entries.push_back({name, static_cast<std::int64_t>(seed)});
  }
  const auto path = out_dir / "manifest.txt";
  write_manifest(manifest, path);
  return path;
}

}  // namespace socs
