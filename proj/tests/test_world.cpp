#include <doctest.h>

#include "oracles.hpp"
#include "pvp/errors.hpp"
#include "pvp/grasp.hpp"
#include "pvp/world.hpp"

using namespace pvp;

namespace {

// Plate `obj` held top-down at its rim apex, still seated in its slot and
// displaced by `dx` across the channel.
WorldState held_in_slot(const SceneConfig& cfg, int obj, double dx) {
  WorldState s = reset(cfg, 1);
  const ObjectSpec& o = cfg.objects[obj];
  s.objects[obj].translation.x() += dx;
  const Pose tcp_local = compose(rim_frame(o, 0.0), Pose::from_translation(Vec3(0, 0, cfg.physics.finger_depth)));
  s.ee = s.ee_target = compose(s.objects[obj], tcp_local);
  s.gripper = GripperState::closed;
  s.attached = obj;
  s.grasp_offset = inverse(tcp_local);
  s.objects[obj] = compose(s.ee, s.grasp_offset);  // consistent to the last bit
  s.grasp_depth = cfg.physics.finger_depth;
  s.held_engaged = true;
  return s;
}

double wall_gap(const SceneConfig& cfg, int obj) {
  return cfg.rack.slot_half_width - cfg.objects[obj].thickness / 2.0;
}

GraspCandidate candidate_at(const SceneConfig& cfg, int obj, double depth) {
  const ObjectSpec& o = cfg.objects[obj];
  GraspCandidate g;
  g.object = obj;
  g.label = o.label;
  g.depth = depth;
  g.pose = compose(o.goal, rim_frame(o, 0.0));
  g.local_tcp = compose(rim_frame(o, 0.0), Pose::from_translation(Vec3(0, 0, depth)));
  return g;
}

}  // namespace

TEST_CASE("reset is deterministic and places objects at their goals") {
  const SceneConfig cfg = dishrack_scene();
  const WorldState a = reset(cfg, 7), b = reset(cfg, 7);
  CHECK(a == b);
  REQUIRE(a.objects.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(translation_distance(a.objects[i], cfg.objects[i].goal) < 1e-12);
  CHECK(a.ee == cfg.scan_pose);
  CHECK(a.preload == 0.0);

  const SceneConfig table = table_scene();
  const WorldState t = reset(table, 7);
  REQUIRE(t.objects.size() == 2);
  CHECK(table.objects[0].label == "bowl");
  CHECK(table.objects[1].label == "cup");
  // Each goal sits on top of its support.
  for (int i = 0; i < 2; ++i) {
    CHECK(table.objects[i].goal.translation.z() == doctest::Approx(table.supports[table.objects[i].support].top_center.z()));
  }
}

TEST_CASE("overlapping goals are rejected") {
  SceneConfig cfg = dishrack_scene();
  cfg.objects[1].goal = cfg.objects[0].goal;
  CHECK_THROWS_AS(reset(cfg, 1), ConfigError);
  SceneConfig dup = dishrack_scene();
  dup.objects[1].label = dup.objects[0].label;
  CHECK_THROWS_AS(dup.validate(), ConfigError);
}

TEST_CASE("free-space step moves exactly by the command") {
  const SceneConfig cfg = dishrack_scene();
  for (const auto& k : {StiffnessSetting::stiff(cfg.physics), StiffnessSetting::compliant_full(cfg.physics)}) {
    const WorldState s = reset(cfg, 3);
    RelPose up;
    up.translation = Vec3(0, 0, 0.05);
    const WorldState n = step(s, up, 0, k);
    // The command is expressed in the EE frame, which points down in the top-down pose.
    CHECK(translation_distance(n.ee, compose(s.ee, up.to_pose())) < 1e-12);
    CHECK(translation_distance(n.ee, s.ee) == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(n.preload == 0.0);
  }
}

TEST_CASE("pressing into a slot wall follows the series-spring balance") {
  const SceneConfig cfg = dishrack_scene();
  const int obj = 1;
  const WorldState s = held_in_slot(cfg, obj, wall_gap(cfg, obj));
  RelPose push;
  push.translation = Vec3(0.01, 0, 0);  // EE +x is world +x in the top-down rim grasp

  const WorldState stiff = step(s, push, 1, StiffnessSetting::stiff(cfg.physics));
  const double realized = stiff.objects[obj].translation.x() - s.objects[obj].translation.x();
  CHECK(realized == doctest::Approx(0.005).epsilon(1e-9));
  CHECK(stiff.preload == doctest::Approx(15.0).epsilon(1e-9));

  const WorldState soft = step(s, push, 1, StiffnessSetting::compliant_full(cfg.physics));
  CHECK(soft.preload <= 0.3);

  // Preload grows strictly with the translational gain.
  double last = -1.0;
  for (double kt : {10.0, 30.0, 300.0, 3000.0, 30000.0}) {
    StiffnessSetting k = StiffnessSetting::stiff(cfg.physics);
    k.k_t = kt;
    const double f = step(s, push, 1, k).preload;
    CHECK(f > last);
    last = f;
  }
}

TEST_CASE("identity command leaves the state unchanged") {
  const SceneConfig cfg = dishrack_scene();
  const WorldState s = held_in_slot(cfg, 0, 0.0);
  const WorldState n = step(s, RelPose::identity(), 1, StiffnessSetting::compliant_rotational(cfg.physics));
  CHECK(n.same_physical_state(s));
}

TEST_CASE("attached object follows the end effector rigidly") {
  const SceneConfig cfg = dishrack_scene();
  WorldState s = held_in_slot(cfg, 2, 0.0);
  Rng rng(4);
  RelPose lift;
  lift.translation = Vec3(0, 0, 0.02);
  for (int i = 0; i < 10; ++i) s = step(s, lift, 1, StiffnessSetting::compliant_rotational(cfg.physics));
  for (int i = 0; i < 20; ++i) {
    RelPose cmd;
    cmd.translation = Vec3(rng.normal(0.01), rng.normal(0.01), 0.01);
    cmd.rotation = RotVec::from_vector(Vec3(rng.normal(0.02), rng.normal(0.02), rng.normal(0.02)));
    s = step(s, cmd, 1, StiffnessSetting::compliant_rotational(cfg.physics));
    if (!s.held_engaged) {
      const Pose expect = compose(s.ee, s.grasp_offset);
      CHECK(translation_distance(expect, s.objects[2]) < 1e-12);
    }
  }
}

TEST_CASE("close_gripper") {
  const SceneConfig cfg = dishrack_scene();
  const int obj = 1;
  WorldState s = reset(cfg, 2);
  const GraspCandidate deep = candidate_at(cfg, obj, cfg.physics.finger_depth);
  s.ee = s.ee_target = deep.ee_pose();

  const WorldState soft = close_gripper(s, StiffnessSetting::compliant_full(cfg.physics), deep);
  CHECK(soft.attached == obj);
  CHECK(read_tactile(soft).contact_fraction >= 0.9);
  CHECK(soft.preload < 0.1);

  WorldState off = s;
  off.ee.translation.x() += 0.005;
  off.ee_target = off.ee;
  const WorldState stiff = close_gripper(off, StiffnessSetting::stiff(cfg.physics), deep);
  CHECK(stiff.preload > cfg.physics.preload_crit);

  const GraspCandidate shallow = candidate_at(cfg, obj, 0.4 * cfg.physics.finger_depth);
  WorldState sh = s;
  sh.ee = sh.ee_target = shallow.ee_pose();
  const TactilePatch p = read_tactile(close_gripper(sh, StiffnessSetting::compliant_full(cfg.physics), shallow));
  CHECK(p.contact_fraction == doctest::Approx(0.4));
  CHECK(p.centroid.x() == doctest::Approx(0.6 * cfg.physics.sensor_length / 2.0));

  WorldState miss = s;
  miss.ee.translation.z() += 0.05;
  CHECK(close_gripper(miss, StiffnessSetting::compliant_full(cfg.physics), deep).failure == FailureCause::grasp_miss);
}

TEST_CASE("tactile patch is empty with the gripper open") {
  const WorldState s = reset(dishrack_scene(), 1);
  CHECK(read_tactile(s).contact_fraction == 0.0);
}

TEST_CASE("preload release shifts the object by c_shift times the preload") {
  const SceneConfig cfg = dishrack_scene();
  const int obj = 1;
  WorldState s = held_in_slot(cfg, obj, 0.0);
  s.preload = 2.0 * cfg.physics.preload_crit;
  s.stiffness = StiffnessSetting::stiff(cfg.physics);
  Rng rng(5);
  RelPose lift;
  lift.translation = Vec3(0, 0, -0.01);  // EE +z points down
  WorldState w = s;
  Pose before_offset = w.grasp_offset;
  bool released = false;
  for (int i = 0; i < 40 && !released; ++i) {
    const WorldState prev = w;
    w = retrieve_tick(w, lift, rng);
    if (prev.held_engaged && !w.held_engaged) {
      released = true;
      const Pose expect = compose(w.ee, prev.grasp_offset);
      CHECK(translation_distance(expect, w.objects[obj]) ==
            doctest::Approx(cfg.physics.c_shift * 2.0 * cfg.physics.preload_crit).epsilon(1e-9));
      CHECK(w.shifted);
    }
    before_offset = w.grasp_offset;
  }
  CHECK(released);
  CHECK(cfg.physics.c_shift * 2.0 * cfg.physics.preload_crit > cfg.physics.eps_pos);
}

TEST_CASE("nominal retrieval neither shifts nor slips") {
  const SceneConfig cfg = dishrack_scene();
  WorldState s = held_in_slot(cfg, 0, 0.0);
  s.stiffness = StiffnessSetting::compliant_rotational(cfg.physics);
  const Pose offset = s.grasp_offset;
  Rng rng(6);
  RelPose lift;
  lift.translation = Vec3(0, 0, -0.005);
  for (int i = 0; i < 200; ++i) s = retrieve_tick(s, lift, rng);
  CHECK_FALSE(s.shifted);
  CHECK_FALSE(s.slipped);
  CHECK(translation_distance(s.grasp_offset, offset) < 1e-12);
}

TEST_CASE("shallow grasps slip at the configured per-tick rate") {
  SceneConfig cfg = dishrack_scene();
  cfg.physics.p_slip = 0.02;
  const int episodes = 4000, ticks = 40;
  int slips = 0;
  for (int e = 0; e < episodes; ++e) {
    WorldState s = held_in_slot(cfg, 1, 0.0);
    s.objects[1].translation.z() += 0.2;  // airborne
    s.ee = s.ee_target = compose(s.objects[1], inverse(s.grasp_offset));
    s.held_engaged = false;
    s.grasp_depth = 0.5 * cfg.physics.finger_depth;
    Rng rng(derive_seed(99, e));
    for (int t = 0; t < ticks; ++t) s = retrieve_tick(s, RelPose::identity(), rng);
    slips += s.slipped;
  }
  const double expect = 1.0 - std::pow(1.0 - cfg.physics.p_slip, ticks);
  const double rate = static_cast<double>(slips) / episodes;
  CHECK(std::abs(rate - expect) < 4.0 * std::sqrt(expect * (1 - expect) / episodes));
}

TEST_CASE("stable grasps never slip") {
  SceneConfig cfg = dishrack_scene();
  cfg.physics.p_slip = 0.5;
  WorldState s = held_in_slot(cfg, 1, 0.0);
  s.objects[1].translation.z() += 0.2;
  s.ee = s.ee_target = compose(s.objects[1], inverse(s.grasp_offset));
  s.held_engaged = false;
  Rng rng(7);
  for (int t = 0; t < 200; ++t) s = retrieve_tick(s, RelPose::identity(), rng);
  CHECK_FALSE(s.slipped);
}

TEST_CASE("render_observation") {
  // Scene without objects: the world keeps its rack but holds no dishes.
  WorldState e = reset(dishrack_scene(), 1);
  e.objects.clear();
  e.stable.clear();
  const ObservationFrame fe = render_observation(e);
  for (int r = 0; r < 32; ++r) {
    for (int c = 0; c < 32; ++c) CHECK(fe.at(r, c, 0) == 0.0f);
  }

  const SceneConfig cfg = dishrack_scene();
  WorldState s = reset(cfg, 1);
  // Wrist straight above the middle plate, looking down.
  s.ee = Pose(top_down_rotation(), cfg.objects[1].goal.translation + Vec3(0, 0, 0.25));
  const ObservationFrame f = render_observation(s);
  double sr = 0, sc = 0, n = 0;
  for (int r = 0; r < 32; ++r) {
    for (int c = 0; c < 32; ++c) {
      const double v = f.at(r, c, 0);
      if (v <= 0) continue;
      sr += v * r;
      sc += v * c;
      n += v;
    }
  }
  REQUIRE(n > 0);
  CHECK(std::abs(sr / n - 15.5) <= 1.0);
  CHECK(std::abs(sc / n - 15.5) <= 1.0);
  for (float v : f.raster) CHECK((v >= 0.0f && v <= 1.0f));
  CHECK(render_observation(s) == f);
}

TEST_CASE("check_success") {
  const SceneConfig cfg = dishrack_scene();
  WorldState s = reset(cfg, 1);
  CHECK(check_success(s, 1));
  WorldState far = s;
  far.objects[1].translation.y() += 0.02;
  CHECK_FALSE(check_success(far, 1));
  WorldState close = s;
  close.objects[1].translation.y() += 0.008;
  close.objects[1].rotation = close.objects[1].rotation * Quat(Eigen::AngleAxisd(deg2rad(3.0), Vec3::UnitY()));
  CHECK(check_success(close, 1));
  WorldState tilted = s;
  tilted.objects[1].rotation = tilted.objects[1].rotation * Quat(Eigen::AngleAxisd(deg2rad(8.0), Vec3::UnitZ()));
  CHECK_FALSE(check_success(tilted, 1));
  WorldState held = s;
  held.gripper = GripperState::closed;
  held.attached = 1;
  CHECK_FALSE(check_success(held, 1));
}

TEST_CASE("spin about a round object's symmetry axis is not a placement error") {
  const SceneConfig cfg = dishrack_scene();
  const Quat g = cfg.objects[0].goal.rotation;
  const Quat spun = g * Quat(Eigen::AngleAxisd(0.7, Vec3::UnitX()));
  CHECK(placement_rotation_error(cfg.objects[0], spun, g) < 1e-12);
  const Quat tilt = g * Quat(Eigen::AngleAxisd(0.1, Vec3::UnitY()));
  CHECK(placement_rotation_error(cfg.objects[0], tilt, g) == doctest::Approx(0.1));
}

TEST_CASE("evaluation reset holds the query target above the scene") {
  const SceneConfig cfg = dishrack_scene();
  const WorldState s = reset(cfg, 11, WorldMode::evaluation);
  REQUIRE(s.attached.has_value());
  CHECK(cfg.objects[*s.attached].label == "green plate");
  CHECK(s.gripper == GripperState::closed);
  CHECK(translation_distance(s.objects[*s.attached], cfg.objects[*s.attached].goal) > cfg.physics.eps_pos);
  CHECK(reset(cfg, 11, WorldMode::evaluation) == s);
}

TEST_CASE("shipped scene files match the built-in scenes") {
  const std::string root = PVP_SOURCE_DIR;
  CHECK(scene_hash(load_scene(root + "/configs/dishrack.json")) == scene_hash(dishrack_scene()));
  CHECK(scene_hash(load_scene(root + "/configs/table.json")) == scene_hash(table_scene()));
  CHECK(scene_hash(scene_from_json(scene_to_json(table_scene()))) == scene_hash(table_scene()));
  CHECK_THROWS_AS(load_scene("no_such_scene"), std::exception);
}
