#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pvp/se3.hpp"

namespace pvp {

enum class Scenario { dishrack, table };
enum class ShapeKind { plate, bowl, cup };

std::string to_string(Scenario s);
std::string to_string(ShapeKind s);

/// A graspable object and where it belongs.
///
/// Plates use a frame at the disc center with +x along the disc normal; bowls
/// and cups use a frame at the bottom center with +z up.
struct ObjectSpec {
  ShapeKind shape = ShapeKind::plate;
  std::string label;
  double radius = 0.11;     // m (rim radius)
  double height = 0.0;      // m (bowl/cup wall height; unused for plates)
  double thickness = 0.004; // m (plate thickness or wall thickness)
  Pose goal;
  int slot = -1;            // rack slot index holding the goal, dishrack only
  int support = -1;         // support index under the goal, table only
};

/// Parallel-tine dish rack; slots are channels along world y.
struct RackGeometry {
  std::vector<Vec3> slots;       // floor center of each channel
  double slot_half_width = 0.006;
  double height = 0.06;          // tine height above the floor
  double chamfer = 0.012;        // extra half-width of the entry funnel at the top
  double chamfer_height = 0.02;
  double tilt_slack = deg2rad(3.0);
};

/// Flat static support (plate, coaster) for the table scenario.
struct SupportSpec {
  std::string name;
  Vec3 top_center = Vec3::Zero();
  double radius = 0.05;
};

/// Contact, grasp and failure-model constants.
struct PhysicsConstants {
  double k_t_stiff = 3000.0;      // N/m
  double k_t_compliant = 30.0;
  double k_r_stiff = 300.0;       // N*m/rad
  double k_r_compliant = 3.0;
  double k_env = 3000.0;          // N/m
  double k_env_rot = 300.0;       // N*m/rad
  double preload_crit = 5.0;      // N
  double f_stable = 0.7;
  double finger_depth = 0.02;     // m
  double sensor_length = 0.024;   // m
  double eps_pos = 0.01;          // m
  double eps_rot = deg2rad(5.0);  // rad
  double c_shift = 0.002;         // m/N
  double p_slip = 1e-3;           // per airborne 120 Hz tick
  double slip_min = 0.015;        // m
  double slip_max = 0.03;         // m
  double slip_rot_max = deg2rad(15.0);
  double shallow_fraction = 0.12;
  double align_sigma = 0.0011;    // m, grasp alignment error along the closing axis
  double capture_radius = 0.01;   // m
  double capture_angle = deg2rad(5.0);
  double drop_tolerance = 0.01;   // m
  double substep_translation = 0.005;
  double substep_rotation = deg2rad(2.0);
};

struct SceneConfig {
  Scenario scenario = Scenario::dishrack;
  std::vector<ObjectSpec> objects;
  RackGeometry rack;
  std::vector<SupportSpec> supports;
  PhysicsConstants physics;

  Pose scan_pose;            // fixed viewing pose before grasp planning
  Pose clearance_pose;       // fixed pose above the scene; retrieval ends near it
  Pose origin;               // reference frame for proprioception
  double pregrasp_offset = 0.08;
  Vec3 up = Vec3::UnitZ();
  double grasp_arc_half_angle = deg2rad(35.0);
  int candidates_per_object = 16;
  std::vector<std::string> query;    // labels to collect on
  double eval_start_sigma = 0.025;   // m, start-pose spread in evaluation mode
  double eval_start_rot_sigma = deg2rad(2.0);
  std::uint64_t seed = 0;

  /// Throws ConfigError on overlapping goals, duplicate labels or bad constants.
  void validate() const;
  int find_label(const std::string& label) const;
};

SceneConfig dishrack_scene();
SceneConfig table_scene();

/// Built-in scene by name ("dishrack", "table") or a JSON file path.
SceneConfig load_scene(const std::string& name_or_path);
SceneConfig scene_from_json(const std::string& text);
std::string scene_to_json(const SceneConfig& cfg);
/// FNV-1a over the canonical JSON serialization.
std::uint64_t scene_hash(const SceneConfig& cfg);

/// Top-down gripper orientation: EE +z along world -z, EE +x along world +x.
Quat top_down_rotation();

}  // namespace pvp
