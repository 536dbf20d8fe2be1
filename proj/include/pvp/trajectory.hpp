#pragma once

#include <vector>

#include "pvp/se3.hpp"

namespace pvp {

struct TimedPose {
  Pose pose;
  double t = 0.0;  // s
  bool operator==(const TimedPose&) const = default;
};

/// Recorded retrieval; timestamps strictly increasing from 0.
struct DenseTrajectory {
  std::vector<TimedPose> entries;
  double rate_hz = 120.0;

  /// Throws DomainError on an empty trajectory or bad timestamps.
  void validate() const;
};

/// Uniformly spaced poses, k-th pose at k*dt.
struct SparseTrajectory {
  std::vector<Pose> poses;
  double dt = 0.2;
  bool operator==(const SparseTrajectory&) const = default;
};

/// Relative EE command stored as (t, theta*e) plus the gripper bit (1 = closed).
struct Action {
  Vec6 delta = Vec6::Zero();
  int gripper = 1;

  static Action open() { return {Vec6::Zero(), 0}; }
  static Action from(const RelPose& r, int gripper) { return {r.vector(), gripper}; }
  RelPose rel() const { return RelPose::from_vector(delta); }
  bool operator==(const Action& o) const { return delta == o.delta && gripper == o.gripper; }
};

/// ceil((t_M - t_0) / dt) computed with a small tolerance so exact multiples do not round up.
std::size_t sample_count(double duration, double dt);

/// Nearest-timestamp resampling; ties go to the earlier entry.
SparseTrajectory downsample(const DenseTrajectory& d, double dt);

/// Place-order copy of a retrieval (last pose first).
SparseTrajectory reversed(const SparseTrajectory& s);

/// Actions moving through consecutive waypoints with the gripper closed, then
/// `n_open` identity actions with the gripper open.
std::vector<Action> actions_from_waypoints(const std::vector<Pose>& place_order, int n_open);

/// Place actions from a retrieval: delta_i = T[M-i]^-1 T[M-i-1] for i < M, then n_open open actions.
std::vector<Action> reverse_to_actions(const SparseTrajectory& s, int n_open);

}  // namespace pvp
