#pragma once

#include <string>
#include <vector>

#include "pvp/rng.hpp"
#include "pvp/scene.hpp"
#include "pvp/se3.hpp"

namespace pvp {

struct WorldState;

/// Grasp on an object's rim. `pose` is the contact frame on the rim with the
/// EE orientation (+z approach, +x finger closing axis); the EE closes at
/// `depth` along +z from it.
struct GraspCandidate {
  Pose pose;
  int object = -1;
  std::string label;
  double depth = 0.0;     // m
  double quality = 0.0;   // [0, 1]
  double rim_angle = 0.0; // rad, position along the rim
  Pose local_tcp;         // EE grasp pose in the object frame

  Pose ee_pose() const { return compose(pose, Pose::from_translation(Vec3(0.0, 0.0, depth))); }
  bool operator==(const GraspCandidate&) const = default;
};

struct LabelQuery {
  std::vector<std::string> labels;

  /// Comma-separated list; empty entries are dropped.
  static LabelQuery parse(const std::string& csv);
  bool matches(const std::string& label) const;
};

/// Rim contact frame of `object` at `rim_angle`, in the object frame.
Pose rim_frame(const ObjectSpec& object, double rim_angle);

/// Rim angles available to the gripper: the exposed arc above the rack for
/// plates, the full circle for bowls and cups.
std::pair<double, double> graspable_arc(const SceneConfig& cfg, const ObjectSpec& object);

/// Candidate grasps along each free object's rim with depths drawn from the
/// configured shallow/deep mixture.
std::vector<GraspCandidate> generate_candidates(const WorldState& world, const SceneConfig& cfg, Rng& rng);

/// Keeps candidates whose object label matches the query, in input order.
std::vector<GraspCandidate> prune_by_label(const std::vector<GraspCandidate>& cands, const LabelQuery& q);

/// Uniform choice; throws NoGraspError on an empty list.
const GraspCandidate& select_grasp(const std::vector<GraspCandidate>& cands, Rng& rng);

/// Grasp pose shifted by `offset` along `up` (world frame), rotation untouched.
/// Throws DomainError unless offset > 0.
Pose pregrasp_of(const Pose& grasp, double offset, const Vec3& up = Vec3::UnitZ());
Pose pregrasp_of(const GraspCandidate& g, double offset, const Vec3& up = Vec3::UnitZ());

}  // namespace pvp
