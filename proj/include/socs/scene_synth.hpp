#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "socs/config_file.hpp"
#include "socs/dataset_io.hpp"

namespace socs {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

using Rgb = std::array<double, 3>;

/// Procedural scene parameters. Keys in the config file match field names;
/// `image_size` is `H, W` and `background_palette` is `r,g,b; r,g,b; ...`
/// with the first entry used for the sky and the rest as ground tiles.
struct SceneConfig {
  Range num_objects{2, 4};  // inclusive integer range
  double world_extent = 30.0;
  Range object_size_range{2.0, 4.5};
  Range object_speed_range{0.0, 6.0};
  Range object_turn_rate_range{0.0, 0.0};
  Range ego_speed_range{2.0, 8.0};
  Range ego_turn_rate_range{-0.15, 0.15};
  int num_cameras = 2;
  std::vector<double> camera_yaw_offsets{0.45, -0.45};
  int image_height = 48;
  int image_width = 112;
  int frames = 4;
  double frame_rate = 5.0;
  int waypoint_count = 16;
  double waypoint_rate = 10.0;
  std::vector<Rgb> background_palette{{0.55, 0.68, 0.82}, {0.34, 0.34, 0.33}, {0.42, 0.41, 0.38}, {0.30, 0.36, 0.29}};
  std::uint64_t seed = 0;

  double horizontal_fov = 1.2;  // radians
  double camera_height = 1.6;   // meters
  double camera_pitch = 0.12;   // radians, positive tilts down
  double noise_sigma = 0.01;
  bool two_tone = true;
};

void validate(const SceneConfig& config);
SceneConfig scene_config_from(const KeyValueConfig& kv);
KeyValueConfig to_key_values(const SceneConfig& config);
/// Hash of the canonical key/value text (seed excluded).
std::uint64_t config_hash(const SceneConfig& config);

/// Planar pose: position and heading (radians, counter-clockwise from +x).
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

/// Pose after moving for `dt` seconds at constant speed and turn rate.
Pose2 unicycle_advance(const Pose2& start, double speed, double turn_rate, double dt);

struct SceneObject {
  int instance_id = 0;
  double length = 0.0;  // along heading
  double width = 0.0;
  double height = 0.0;
  Rgb body_color{};
  Rgb patch_color{};    // windshield patch; equals body_color when two_tone is off
  std::vector<Pose2> poses;  // per frame
};

struct PinholeIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
};

struct SceneSpec {
  std::vector<SceneObject> objects;
  std::vector<Pose2> ego_poses;         // per frame
  std::vector<Pose2> future_ego_poses;  // at the waypoint timestamps
  std::vector<double> timestamps;       // per frame
  std::vector<std::vector<Eigen::Matrix4d>> camera_extrinsics;  // [V][F] camera-to-world
  PinholeIntrinsics intrinsics;
  std::uint64_t seed = 0;
};

SceneSpec generate_scene(const SceneConfig& config, std::uint64_t seed);

/// Camera-to-world transform for a camera rigidly mounted on the ego with the
/// given yaw offset. Camera axes follow the x-right, y-down, z-forward
/// convention.
Eigen::Matrix4d camera_to_world(const Pose2& ego, double yaw_offset, double height, double pitch);

struct RenderedView {
  std::vector<float> rgb;            // [H, W, 3]
  std::vector<std::int32_t> mask;    // [H, W]
};

/// Renders one camera at one frame without noise.
RenderedView render_view(const SceneSpec& scene, const SceneConfig& config, int camera, int frame);

/// Projects a world point into pixel coordinates (continuous, pixel centers at
/// +0.5). Returns false if the point is behind the camera.
bool project_point(const SceneSpec& scene, int camera, int frame, const Eigen::Vector3d& world, double& u, double& v);

SequenceRecord render_sequence(const SceneSpec& scene, const SceneConfig& config);

/// Future ego positions expressed in the ego frame at the last input frame,
/// shape [waypoint_count, 2].
Tensor<double> compute_ego_waypoints(const SceneSpec& scene, const SceneConfig& config);

/// Writes `n_sequences` records and `manifest.txt` into `out_dir`. Sequence i
/// uses seed `first_seed + i`. Returns the manifest path.
std::filesystem::path generate_dataset(const SceneConfig& config, std::size_t n_sequences,
                                       const std::filesystem::path& out_dir, std::uint64_t first_seed,
                                       const std::string& split = "train");

}  // namespace socs
