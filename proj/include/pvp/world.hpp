#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "pvp/rng.hpp"
#include "pvp/scene.hpp"
#include "pvp/se3.hpp"

namespace pvp {

struct GraspCandidate;

enum class StiffnessMode { stiff, compliant_full, compliant_rotational };

/// Cartesian impedance gains.
struct StiffnessSetting {
  double k_t = 3000.0;  // N/m
  double k_r = 300.0;   // N*m/rad
  StiffnessMode mode = StiffnessMode::stiff;

  static StiffnessSetting stiff(const PhysicsConstants& p);
  static StiffnessSetting compliant_full(const PhysicsConstants& p);
  /// Stiff in translation, compliant about the rotational axes.
  static StiffnessSetting compliant_rotational(const PhysicsConstants& p);
  void validate() const;
  bool operator==(const StiffnessSetting&) const = default;
};

enum class GripperState : std::uint8_t { open = 0, closed = 1 };
enum class WorldMode : std::uint8_t { collection, evaluation };
enum class FailureCause : std::uint8_t { none = 0, grasp_miss = 1, unstable_grasp = 2, misplacement = 3 };

const char* to_string(FailureCause c);

struct TactilePatch {
  double contact_fraction = 0.0;
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();  // sensor plane; +x toward the fingertip
};

/// Synthetic wrist observation: orthographic raster plus proprioception.
struct ObservationFrame {
  static constexpr int kHeight = 32;
  static constexpr int kWidth = 32;
  static constexpr int kChannels = 3;  // object occupancy, goal/slot occupancy, inverse depth
  static constexpr int kRasterSize = kHeight * kWidth * kChannels;
  static constexpr int kProprio = 7;   // EE pose from the scene origin (t, theta*e) and gripper bit
  static constexpr int kSize = kRasterSize + kProprio;

  std::vector<float> raster = std::vector<float>(kRasterSize, 0.0f);  // HWC
  std::array<float, kProprio> proprio{};

  float at(int row, int col, int channel) const { return raster[(row * kWidth + col) * kChannels + channel]; }
  bool operator==(const ObservationFrame&) const = default;
};

struct WorldState {
  std::shared_ptr<const SceneConfig> scene;
  WorldMode mode = WorldMode::collection;
  Pose ee;               // realized end-effector pose
  Pose ee_target;        // impedance equilibrium (commanded) pose
  GripperState gripper = GripperState::open;
  std::optional<int> attached;
  Pose grasp_offset;     // attached object pose in the EE frame
  std::vector<Pose> objects;
  std::vector<bool> stable;  // object rests stably (false after an unsupported release)
  double preload = 0.0;        // N, stored grasp preload against the environment
  double contact_force = 0.0;  // N, from the last motion
  double grasp_depth = 0.0;    // m
  bool held_engaged = false;   // attached object is in contact with an environment constraint
  bool slipped = false;
  bool shifted = false;
  std::uint64_t steps = 0;
  StiffnessSetting stiffness;
  FailureCause failure = FailureCause::none;
  int target = -1;  // object to place in evaluation mode

  const SceneConfig& cfg() const { return *scene; }
  /// Physical state comparison; ignores the step counter.
  bool same_physical_state(const WorldState& other) const;
  bool operator==(const WorldState& other) const;
};

/// Objects at their goals (collection) or the query target held above the scene (evaluation).
/// Throws ConfigError for an infeasible scene.
WorldState reset(const SceneConfig& cfg, std::uint64_t seed, WorldMode mode = WorldMode::collection);

/// Quasi-static impedance step: the commanded pose is composed onto the current
/// equilibrium, contact attenuates the realized motion, then the gripper command applies.
WorldState step(const WorldState& s, const RelPose& cmd, int gripper_cmd, const StiffnessSetting& k);

/// Moves the equilibrium to an absolute pose (same contact handling as step).
WorldState move_to(const WorldState& s, const Pose& target, const StiffnessSetting& k);

WorldState close_gripper(const WorldState& s, const StiffnessSetting& k, const GraspCandidate& grasp);
WorldState open_gripper(const WorldState& s);

/// One 120 Hz retrieval tick: moves like step and applies the preload-release
/// shift and shallow-grasp slip models.
WorldState retrieve_tick(const WorldState& s, const RelPose& cmd, Rng& rng);

TactilePatch read_tactile(const WorldState& s);
ObservationFrame render_observation(const WorldState& s);

/// Angle between the symmetry axes of `pose` and `goal` (plate normal, bowl/cup up axis).
/// Spins about that axis leave a round object's placement unchanged.
double placement_rotation_error(const ObjectSpec& o, const Quat& pose, const Quat& goal);

/// Released object within eps_pos/eps_rot of the goal and resting stably.
bool check_success(const WorldState& s, int object, const Pose& goal);
bool check_success(const WorldState& s, int object);

/// True when the pose of `object` would be in contact with an environment constraint.
bool in_environment_contact(const SceneConfig& cfg, int object, const Pose& pose);

}  // namespace pvp
