#include "pvp/world.hpp"

#include <algorithm>
#include <cmath>

#include "pvp/errors.hpp"
#include "pvp/grasp.hpp"

namespace pvp {

StiffnessSetting StiffnessSetting::stiff(const PhysicsConstants& p) {
  return {p.k_t_stiff, p.k_r_stiff, StiffnessMode::stiff};
}

StiffnessSetting StiffnessSetting::compliant_full(const PhysicsConstants& p) {
  return {p.k_t_compliant, p.k_r_compliant, StiffnessMode::compliant_full};
}

StiffnessSetting StiffnessSetting::compliant_rotational(const PhysicsConstants& p) {
  return {p.k_t_stiff, p.k_r_compliant, StiffnessMode::compliant_rotational};
}

void StiffnessSetting::validate() const {
  if (!(k_t > 0.0) || !(k_r > 0.0)) throw ConfigError("stiffness must be positive");
}

const char* to_string(FailureCause c) {
  switch (c) {
    case FailureCause::none: return "none";
    case FailureCause::grasp_miss: return "grasp_miss";
    case FailureCause::unstable_grasp: return "unstable_grasp";
    case FailureCause::misplacement: return "misplacement";
  }
  return "none";
}

bool WorldState::same_physical_state(const WorldState& o) const {
  return mode == o.mode && ee == o.ee && ee_target == o.ee_target && gripper == o.gripper &&
         attached == o.attached && grasp_offset == o.grasp_offset && objects == o.objects && stable == o.stable &&
         preload == o.preload && contact_force == o.contact_force && grasp_depth == o.grasp_depth &&
         held_engaged == o.held_engaged && slipped == o.slipped && shifted == o.shifted && failure == o.failure &&
         target == o.target;
}

bool WorldState::operator==(const WorldState& o) const {
  return same_physical_state(o) && steps == o.steps && stiffness == o.stiffness;
}

namespace {

struct Contact {
  Pose realized;
  double force = 0.0;
  bool engaged = false;
};

double slot_slack(const SceneConfig& cfg, const ObjectSpec& o) {
  return std::max(0.0, cfg.rack.slot_half_width - o.thickness / 2.0);
}

// Half-width available to the plate center at height `rel_z` above its resting height.
double channel_limit(const SceneConfig& cfg, const ObjectSpec& o, double rel_z) {
  const auto& r = cfg.rack;
  const double ramp = std::clamp((rel_z - (r.height - r.chamfer_height)) / r.chamfer_height, 0.0, 1.0);
  return slot_slack(cfg, o) + r.chamfer * ramp;
}

int nearest_slot(const SceneConfig& cfg, double x) {
  int best = 0;
  double best_d = 1e300;
  for (std::size_t i = 0; i < cfg.rack.slots.size(); ++i) {
    const double d = std::abs(cfg.rack.slots[i].x() - x);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

double support_height(const SceneConfig& cfg, const Vec3& p) {
  double h = 0.0;
  for (const auto& s : cfg.supports) {
    if ((p.head<2>() - s.top_center.head<2>()).norm() <= s.radius) h = std::max(h, s.top_center.z());
  }
  return h;
}

// Rotation of `q` relative to the object's goal orientation, as a rotation vector in the goal frame.
Vec3 goal_relative_rotvec(const ObjectSpec& o, const Quat& q) {
  return RotVec::from_quaternion(o.goal.rotation.conjugate() * q).vector();
}

Quat from_goal_relative(const ObjectSpec& o, const Vec3& w) {
  return canonical(o.goal.rotation * RotVec::from_vector(w).quaternion());
}

// Series-spring balance between the impedance controller and the environment:
// the realized violation is the commanded one scaled by k / (k + k_env).
Contact realize(const ObjectSpec& o, const PhysicsConstants& p, const StiffnessSetting& k, const Pose& target,
                const Vec3& t_violation, const Vec3& w, const Vec3& w_proj, bool engaged) {
  Contact c;
  c.engaged = engaged;
  c.realized = target;
  if (!t_violation.isZero()) {
    const double env_share = p.k_env / (k.k_t + p.k_env);
    c.realized.translation = target.translation - t_violation * env_share;
    c.force = (t_violation * (k.k_t * p.k_env / (k.k_t + p.k_env))).norm();
  }
  const Vec3 dw = w - w_proj;
  if (!dw.isZero()) {
    const Vec3 w_real = w_proj + dw * (k.k_r / (k.k_r + p.k_env_rot));
    c.realized.rotation = from_goal_relative(o, w_real);
  }
  return c;
}

Contact resolve_plate(const SceneConfig& cfg, const ObjectSpec& o, const Pose& current, bool current_engaged,
                      const Pose& target, const StiffnessSetting& k) {
  const auto& rack = cfg.rack;
  const int slot = nearest_slot(cfg, current_engaged ? current.translation.x() : target.translation.x());
  const Vec3 base = rack.slots[slot] + Vec3(0.0, 0.0, o.radius);
  const Vec3 rel = target.translation - base;
  Vec3 proj = rel;
  const Vec3 w = goal_relative_rotvec(o, target.rotation);
  Vec3 w_proj = w;
  bool engaged = false;
  if (rel.z() < rack.height) {
    if (current_engaged || std::abs(rel.x()) <= channel_limit(cfg, o, rack.height)) {
      engaged = true;
      proj.z() = std::max(rel.z(), 0.0);
      const double lim = channel_limit(cfg, o, proj.z());
      proj.x() = std::clamp(rel.x(), -lim, lim);
      w_proj.y() = std::clamp(w.y(), -rack.tilt_slack, rack.tilt_slack);
      w_proj.z() = std::clamp(w.z(), -rack.tilt_slack, rack.tilt_slack);
    } else {
      proj.z() = rack.height;  // resting on the tine tops
    }
  }
  Contact c = realize(o, cfg.physics, k, target, rel - proj, w, w_proj, engaged);
  if (engaged) c.engaged = (c.realized.translation - base).z() < rack.height;
  return c;
}

Contact resolve_supported(const SceneConfig& cfg, const ObjectSpec& o, const Pose& target,
                          const StiffnessSetting& k) {
  const double floor = support_height(cfg, target.translation);
  Vec3 violation = Vec3::Zero();
  const Vec3 w = goal_relative_rotvec(o, target.rotation);
  Vec3 w_proj = w;
  bool touching = false;
  if (target.translation.z() <= floor) {
    touching = true;
    violation.z() = target.translation.z() - floor;
    w_proj.x() = 0.0;
    w_proj.y() = 0.0;
  }
  return realize(o, cfg.physics, k, target, violation, w, w_proj, touching);
}

Contact resolve(const SceneConfig& cfg, int object, const Pose& current, bool current_engaged, const Pose& target,
                const StiffnessSetting& k) {
  const ObjectSpec& o = cfg.objects[object];
  if (cfg.scenario == Scenario::dishrack) return resolve_plate(cfg, o, current, current_engaged, target, k);
  return resolve_supported(cfg, o, target, k);
}

WorldState move_equilibrium(const WorldState& s, const Pose& target, const StiffnessSetting& k) {
  WorldState out = s;
  out.stiffness = k;
  const Pose start = s.ee_target;
  out.ee_target = target;
  if (!s.attached) {
    out.ee = target;
    out.contact_force = 0.0;
    return out;
  }
  const auto& p = s.cfg().physics;
  const double dist = translation_distance(start, target);
  const double ang = rotation_distance(start.rotation, target.rotation);
  const int n = std::clamp(static_cast<int>(std::ceil(std::max(dist / p.substep_translation, ang / p.substep_rotation))),
                           1, 400);
  const int a = *s.attached;
  for (int i = 1; i <= n; ++i) {
    const Pose ee_i = i == n ? target : interpolate(start, target, static_cast<double>(i) / n);
    const Contact c = resolve(s.cfg(), a, out.objects[a], out.held_engaged, compose(ee_i, out.grasp_offset), k);
    out.objects[a] = c.realized;
    out.held_engaged = c.engaged;
    out.contact_force = c.force;
    if (out.gripper == GripperState::closed) out.preload = std::max(out.preload, c.force);
    out.ee = c.force == 0.0 && c.realized == compose(ee_i, out.grasp_offset)
                 ? ee_i
                 : compose(c.realized, inverse(out.grasp_offset));
  }
  return out;
}

void settle_released(WorldState& s, int a) {
  const SceneConfig& cfg = s.cfg();
  const ObjectSpec& o = cfg.objects[a];
  Pose& pose = s.objects[a];
  const double drop_tol = cfg.physics.drop_tolerance;
  if (cfg.scenario == Scenario::dishrack) {
    const int slot = nearest_slot(cfg, pose.translation.x());
    const Vec3 base = cfg.rack.slots[slot] + Vec3(0.0, 0.0, o.radius);
    Vec3 rel = pose.translation - base;
    const bool in_channel = rel.z() < cfg.rack.height && std::abs(rel.x()) <= channel_limit(cfg, o, rel.z());
    const bool drops_in = rel.z() >= cfg.rack.height && rel.z() - cfg.rack.height <= drop_tol &&
                          std::abs(rel.x()) <= channel_limit(cfg, o, cfg.rack.height);
    if (in_channel || drops_in) {
      const double lim = channel_limit(cfg, o, 0.0);
      rel.x() = std::clamp(rel.x(), -lim, lim);
      rel.z() = 0.0;
      Vec3 w = goal_relative_rotvec(o, pose.rotation);
      w.y() = std::clamp(w.y(), -cfg.rack.tilt_slack, cfg.rack.tilt_slack);
      w.z() = std::clamp(w.z(), -cfg.rack.tilt_slack, cfg.rack.tilt_slack);
      pose = Pose(from_goal_relative(o, w), base + rel);
      s.stable[a] = true;
    } else {
      s.stable[a] = false;
    }
    return;
  }
  const double floor = support_height(cfg, pose.translation);
  const double gap = pose.translation.z() - floor;
  if (gap <= drop_tol) {
    pose.translation.z() = floor;
    Vec3 w = goal_relative_rotvec(o, pose.rotation);
    w.x() = 0.0;
    w.y() = 0.0;
    pose.rotation = from_goal_relative(o, w);
    s.stable[a] = true;
  } else {
    s.stable[a] = false;
  }
}

Pose random_rotation_offset(Rng& rng, double sigma) {
  const Vec3 w(rng.normal(sigma), rng.normal(sigma), rng.normal(sigma));
  return {RotVec::from_vector(w).quaternion(), Vec3::Zero()};
}

}  // namespace

bool in_environment_contact(const SceneConfig& cfg, int object, const Pose& pose) {
  const ObjectSpec& o = cfg.objects[object];
  if (cfg.scenario == Scenario::dishrack) {
    const int slot = nearest_slot(cfg, pose.translation.x());
    const Vec3 rel = pose.translation - (cfg.rack.slots[slot] + Vec3(0.0, 0.0, o.radius));
    return rel.z() < cfg.rack.height;
  }
  return pose.translation.z() <= support_height(cfg, pose.translation) + 1e-9;
}

WorldState reset(const SceneConfig& cfg, std::uint64_t seed, WorldMode mode) {
  cfg.validate();
  WorldState s;
  s.scene = std::make_shared<const SceneConfig>(cfg);
  s.mode = mode;
  s.ee = cfg.scan_pose;
  s.ee_target = cfg.scan_pose;
  s.stiffness = StiffnessSetting::stiff(cfg.physics);
  for (const auto& o : cfg.objects) s.objects.push_back(o.goal);
  s.stable.assign(cfg.objects.size(), true);
  if (mode == WorldMode::collection) return s;

  Rng rng(derive_seed(seed, 0x7e5e7));
  const LabelQuery q{cfg.query};
  std::vector<int> matches;
  for (std::size_t i = 0; i < cfg.objects.size(); ++i) {
    if (q.labels.empty() || q.matches(cfg.objects[i].label)) matches.push_back(static_cast<int>(i));
  }
  if (matches.empty()) throw ConfigError("evaluation query matches no object");
  const int target = matches[matches.size() == 1 ? 0 : rng.index(matches.size())];
  const ObjectSpec& o = cfg.objects[target];
  const auto [lo, hi] = graspable_arc(cfg, o);
  const double psi = rng.uniform(lo, hi);
  const double depth = rng.uniform(0.85, 1.0) * cfg.physics.finger_depth;
  const Pose tcp_local = compose(rim_frame(o, psi), Pose::from_translation(Vec3(0.0, 0.0, depth)));

  Pose start = cfg.clearance_pose;
  for (int i = 0; i < 3; ++i) start.translation[i] += rng.normal(cfg.eval_start_sigma);
  start = compose(start, random_rotation_offset(rng, cfg.eval_start_rot_sigma));

  s.target = target;
  s.ee = start;
  s.ee_target = start;
  s.gripper = GripperState::closed;
  s.attached = target;
  s.grasp_offset = inverse(tcp_local);
  s.grasp_depth = depth;
  s.objects[target] = compose(start, s.grasp_offset);
  s.held_engaged = in_environment_contact(cfg, target, s.objects[target]);
  s.stiffness = StiffnessSetting::compliant_rotational(cfg.physics);
  return s;
}

WorldState move_to(const WorldState& s, const Pose& target, const StiffnessSetting& k) {
  WorldState out = move_equilibrium(s, target, k);
  ++out.steps;
  return out;
}

WorldState step(const WorldState& s, const RelPose& cmd, int gripper_cmd, const StiffnessSetting& k) {
  WorldState out = move_equilibrium(s, compose(s.ee_target, cmd.to_pose()), k);
  if (gripper_cmd == 0 && out.gripper == GripperState::closed) {
    out = open_gripper(out);
  } else if (gripper_cmd == 1 && out.gripper == GripperState::open) {
    out.gripper = GripperState::closed;
  }
  ++out.steps;
  return out;
}

WorldState open_gripper(const WorldState& s) {
  WorldState out = s;
  out.gripper = GripperState::open;
  out.preload = 0.0;
  out.contact_force = 0.0;
  out.grasp_depth = 0.0;
  if (out.attached) {
    const int a = *out.attached;
    out.attached.reset();
    out.held_engaged = false;
    // The arm relaxes onto its realized pose once unloaded.
    out.ee_target = out.ee;
    settle_released(out, a);
  }
  return out;
}

WorldState close_gripper(const WorldState& s, const StiffnessSetting& k, const GraspCandidate& grasp) {
  k.validate();
  WorldState out = s;
  out.stiffness = k;
  out.gripper = GripperState::closed;
  const auto& p = s.cfg().physics;
  const int a = grasp.object;
  const Pose ideal = compose(s.objects[a], grasp.local_tcp);
  const Vec3 err = s.ee.translation - ideal.translation;
  if (err.norm() > p.capture_radius || rotation_distance(s.ee.rotation, ideal.rotation) > p.capture_angle) {
    out.failure = FailureCause::grasp_miss;
    return out;
  }
  const bool constrained = in_environment_contact(s.cfg(), a, s.objects[a]);
  if (constrained) {
    // The object is pinned by the environment; the EE conforms to it and the
    // misalignment is stored as a spring preload.
    out.preload = k.k_t * err.norm();
    out.ee = ideal;
  } else {
    // Free objects are pushed into alignment by the fingers.
    out.objects[a].translation += err;
    out.preload = 0.0;
  }
  out.ee_target = out.ee;
  out.attached = a;
  out.grasp_offset = compose(inverse(out.ee), out.objects[a]);
  out.grasp_depth = grasp.depth;
  out.held_engaged = constrained;
  out.failure = FailureCause::none;
  return out;
}

WorldState retrieve_tick(const WorldState& s, const RelPose& cmd, Rng& rng) {
  const bool was_engaged = s.held_engaged;
  WorldState out = step(s, cmd, 1, s.stiffness);
  if (!out.attached) return out;
  const auto& p = s.cfg().physics;
  const int a = *out.attached;
  if (was_engaged && !out.held_engaged) {
    // Contact released: a large stored preload kicks the object in the hand.
    Vec3 dir(rng.normal(1.0), rng.normal(1.0), rng.normal(1.0));
    if (out.preload > p.preload_crit) {
      out.objects[a].translation += dir.normalized() * (p.c_shift * out.preload);
      out.grasp_offset = compose(inverse(out.ee), out.objects[a]);
      out.shifted = true;
    }
    out.preload = 0.0;
  }
  if (!out.held_engaged && !out.slipped && read_tactile(out).contact_fraction < p.f_stable) {
    if (rng.bernoulli(p.p_slip)) {
      const double ang = rng.uniform(0.0, 2.0 * kPi);
      const double mag = rng.uniform(p.slip_min, p.slip_max);
      const double rot = rng.uniform(-p.slip_rot_max, p.slip_rot_max);
      const Pose slip(Quat(Eigen::AngleAxisd(rot, Vec3::UnitX())), Vec3(0.0, std::cos(ang), std::sin(ang)) * mag);
      out.grasp_offset = compose(slip, out.grasp_offset);
      out.objects[a] = compose(out.ee, out.grasp_offset);
      out.slipped = true;
    }
  }
  return out;
}

TactilePatch read_tactile(const WorldState& s) {
  TactilePatch patch;
  if (s.gripper == GripperState::open || !s.attached) return patch;
  const auto& p = s.cfg().physics;
  const double f = std::clamp(s.grasp_depth / p.finger_depth, 0.0, 1.0);
  patch.contact_fraction = f;
  patch.centroid = Eigen::Vector2d((1.0 - f) * p.sensor_length / 2.0, 0.0);
  return patch;
}

double placement_rotation_error(const ObjectSpec& o, const Quat& pose, const Quat& goal) {
  const Vec3 axis = o.shape == ShapeKind::plate ? Vec3::UnitX() : Vec3::UnitZ();
  const Vec3 a = pose * axis, b = goal * axis;
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

bool check_success(const WorldState& s, int object, const Pose& goal) {
  if (s.gripper != GripperState::open || s.attached == object) return false;
  const auto& p = s.cfg().physics;
  const Pose& pose = s.objects[object];
  return s.stable[object] && translation_distance(pose, goal) <= p.eps_pos &&
         placement_rotation_error(s.cfg().objects[object], pose.rotation, goal.rotation) <= p.eps_rot;
}

bool check_success(const WorldState& s, int object) { return check_success(s, object, s.cfg().objects[object].goal); }

}  // namespace pvp
