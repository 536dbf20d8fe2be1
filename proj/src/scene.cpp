#include "pvp/scene.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pvp/errors.hpp"

namespace pvp {

using nlohmann::json;

std::string to_string(Scenario s) { return s == Scenario::dishrack ? "dishrack" : "table"; }

std::string to_string(ShapeKind s) {
  switch (s) {
    case ShapeKind::plate: return "plate";
    case ShapeKind::bowl: return "bowl";
    case ShapeKind::cup: return "cup";
  }
  return "plate";
}

namespace {

Scenario scenario_from(const std::string& s) {
  if (s == "dishrack") return Scenario::dishrack;
  if (s == "table") return Scenario::table;
  throw ConfigError("unknown scenario '" + s + "'");
}

ShapeKind shape_from(const std::string& s) {
  if (s == "plate") return ShapeKind::plate;
  if (s == "bowl") return ShapeKind::bowl;
  if (s == "cup") return ShapeKind::cup;
  throw ConfigError("unknown object shape '" + s + "'");
}

struct Box {
  Vec3 lo, hi;
};

// World-aligned bounds of the object at its goal.
Box goal_bounds(const ObjectSpec& o) {
  Vec3 lo, hi;
  if (o.shape == ShapeKind::plate) {
    lo = Vec3(-o.thickness / 2, -o.radius, -o.radius);
    hi = Vec3(o.thickness / 2, o.radius, o.radius);
  } else {
    lo = Vec3(-o.radius, -o.radius, 0.0);
    hi = Vec3(o.radius, o.radius, o.height);
  }
  Box b{Vec3::Constant(1e9), Vec3::Constant(-1e9)};
  for (int i = 0; i < 8; ++i) {
    const Vec3 corner((i & 1) ? hi.x() : lo.x(), (i & 2) ? hi.y() : lo.y(), (i & 4) ? hi.z() : lo.z());
    const Vec3 w = o.goal.apply(corner);
    b.lo = b.lo.cwiseMin(w);
    b.hi = b.hi.cwiseMax(w);
  }
  return b;
}

bool overlaps(const Box& a, const Box& b) {
  for (int i = 0; i < 3; ++i) {
    if (a.hi[i] <= b.lo[i] || b.hi[i] <= a.lo[i]) return false;
  }
  return true;
}

json pose_json(const Pose& p) {
  return {{"q", {p.rotation.w(), p.rotation.x(), p.rotation.y(), p.rotation.z()}},
          {"t", {p.translation.x(), p.translation.y(), p.translation.z()}}};
}

Pose pose_of(const json& j) {
  const auto q = j.at("q").get<std::vector<double>>();
  const auto t = j.at("t").get<std::vector<double>>();
  if (q.size() != 4 || t.size() != 3) throw ConfigError("pose needs q[4] and t[3]");
  return {Quat(q[0], q[1], q[2], q[3]), Vec3(t[0], t[1], t[2])};
}

json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

Vec3 vec_of(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw ConfigError("expected a 3-vector");
  return {v[0], v[1], v[2]};
}

// Physics fields, angles stored in degrees in the file.
#define PVP_PHYSICS_FIELDS(X)                                                              \
  X(k_t_stiff) X(k_t_compliant) X(k_r_stiff) X(k_r_compliant) X(k_env) X(k_env_rot)      \
  X(preload_crit) X(f_stable) X(finger_depth) X(sensor_length) X(eps_pos) X(c_shift)      \
  X(p_slip) X(slip_min) X(slip_max) X(shallow_fraction) X(align_sigma) X(capture_radius) \
  X(drop_tolerance) X(substep_translation)
#define PVP_PHYSICS_ANGLES(X) X(eps_rot) X(slip_rot_max) X(capture_angle) X(substep_rotation)

json physics_json(const PhysicsConstants& p) {
  json j;
#define X(f) j[#f] = p.f;
  PVP_PHYSICS_FIELDS(X)
#undef X
#define X(f) j[#f "_deg"] = rad2deg(p.f);
  PVP_PHYSICS_ANGLES(X)
#undef X
  return j;
}

void physics_from(const json& j, PhysicsConstants& p) {
  for (const auto& [key, _] : j.items()) {
    bool known = false;
#define X(f) known |= key == #f;
    PVP_PHYSICS_FIELDS(X)
#undef X
#define X(f) known |= key == #f "_deg";
    PVP_PHYSICS_ANGLES(X)
#undef X
    if (!known) throw ConfigError("unknown physics constant '" + key + "'");
  }
#define X(f) if (j.contains(#f)) p.f = j.at(#f).get<double>();
  PVP_PHYSICS_FIELDS(X)
#undef X
#define X(f) if (j.contains(#f "_deg")) p.f = deg2rad(j.at(#f "_deg").get<double>());
  PVP_PHYSICS_ANGLES(X)
#undef X
}

SceneConfig base_scene() {
  SceneConfig cfg;
  cfg.scan_pose = Pose(top_down_rotation(), Vec3(0.0, 0.0, 0.45));
  cfg.clearance_pose = Pose(top_down_rotation(), Vec3(0.0, -0.04, 0.39));
  cfg.origin = Pose(top_down_rotation(), Vec3(0.0, 0.0, 0.0));
  return cfg;
}

}  // namespace

Quat top_down_rotation() {
  Mat3 r;
  r << 1, 0, 0, 0, -1, 0, 0, 0, -1;
  return canonical(Quat(r));
}

void SceneConfig::validate() const {
  if (objects.empty()) throw ConfigError("scene has no objects");
  std::set<std::string> labels;
  for (const auto& o : objects) {
    if (o.label.empty()) throw ConfigError("object without label");
    if (!labels.insert(o.label).second) throw ConfigError("duplicate object label '" + o.label + "'");
    if (!(o.radius > 0.0) || !(o.thickness > 0.0)) throw ConfigError("object '" + o.label + "' has bad dimensions");
    if (o.shape != ShapeKind::plate && !(o.height > 0.0)) throw ConfigError("object '" + o.label + "' needs a height");
    if (scenario == Scenario::dishrack) {
      if (o.shape != ShapeKind::plate) throw ConfigError("dishrack scenes hold plates only");
      if (o.slot < 0 || o.slot >= static_cast<int>(rack.slots.size())) {
        throw ConfigError("object '" + o.label + "' references a missing slot");
      }
    }
    if (o.support >= static_cast<int>(supports.size())) {
      throw ConfigError("object '" + o.label + "' references a missing support");
    }
  }
  for (std::size_t i = 0; i < objects.size(); ++i) {
    for (std::size_t j = i + 1; j < objects.size(); ++j) {
      if (overlaps(goal_bounds(objects[i]), goal_bounds(objects[j]))) {
        throw ConfigError("goals of '" + objects[i].label + "' and '" + objects[j].label + "' overlap");
      }
    }
  }
  const auto& p = physics;
  if (!(p.k_t_stiff > 0 && p.k_t_compliant > 0 && p.k_r_stiff > 0 && p.k_r_compliant > 0 && p.k_env > 0 &&
        p.k_env_rot > 0)) {
    throw ConfigError("stiffness constants must be positive");
  }
  if (!(p.finger_depth > 0 && p.sensor_length > 0)) throw ConfigError("finger geometry must be positive");
  if (!(p.f_stable > 0 && p.f_stable <= 1)) throw ConfigError("f_stable must lie in (0, 1]");
  if (!(p.shallow_fraction >= 0 && p.shallow_fraction <= 1)) throw ConfigError("shallow_fraction must lie in [0, 1]");
  if (!(p.p_slip >= 0 && p.p_slip <= 1)) throw ConfigError("p_slip must lie in [0, 1]");
  if (!(p.substep_translation > 0 && p.substep_rotation > 0)) throw ConfigError("substeps must be positive");
  if (!(pregrasp_offset > 0)) throw ConfigError("pregrasp offset must be positive");
  if (candidates_per_object < 8) throw ConfigError("need at least 8 grasp candidates per object");
  if (scenario == Scenario::dishrack && !(pregrasp_offset > rack.height)) {
    throw ConfigError("pregrasp offset must clear the rack tines");
  }
}

int SceneConfig::find_label(const std::string& label) const {
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].label == label) return static_cast<int>(i);
  }
  return -1;
}

SceneConfig dishrack_scene() {
  SceneConfig cfg = base_scene();
  cfg.scenario = Scenario::dishrack;
  cfg.rack.slots = {Vec3(-0.04, 0.0, 0.0), Vec3(0.0, 0.0, 0.0), Vec3(0.04, 0.0, 0.0)};
  const char* labels[] = {"blue plate", "green plate", "red plate"};
  for (int i = 0; i < 3; ++i) {
    ObjectSpec o;
    o.shape = ShapeKind::plate;
    o.label = labels[i];
    o.radius = 0.11;
    o.thickness = 0.004;
    o.slot = i;
    o.goal = Pose::from_translation(cfg.rack.slots[i] + Vec3(0.0, 0.0, o.radius));
    cfg.objects.push_back(o);
  }
  cfg.query = {"green plate"};
  return cfg;
}

SceneConfig table_scene() {
  SceneConfig cfg = base_scene();
  cfg.scenario = Scenario::table;
  cfg.supports = {{"plate", Vec3(-0.10, 0.0, 0.015), 0.12}, {"coaster", Vec3(0.12, 0.05, 0.005), 0.05}};
  ObjectSpec bowl;
  bowl.shape = ShapeKind::bowl;
  bowl.label = "bowl";
  bowl.radius = 0.07;
  bowl.height = 0.06;
  bowl.thickness = 0.004;
  bowl.support = 0;
  bowl.goal = Pose::from_translation(cfg.supports[0].top_center);
  ObjectSpec cup;
  cup.shape = ShapeKind::cup;
  cup.label = "cup";
  cup.radius = 0.04;
  cup.height = 0.09;
  cup.thickness = 0.004;
  cup.support = 1;
  cup.goal = Pose::from_translation(cfg.supports[1].top_center);
  cfg.objects = {bowl, cup};
  cfg.clearance_pose = Pose(top_down_rotation(), Vec3(0.0, 0.0, 0.36));
  cfg.query = {"bowl", "cup"};
  return cfg;
}

SceneConfig scene_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scene config is not valid JSON: ") + e.what());
  }
  try {
    const Scenario sc = scenario_from(j.value("scenario", std::string("dishrack")));
    SceneConfig cfg = sc == Scenario::dishrack ? dishrack_scene() : table_scene();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("query")) cfg.query = j.at("query").get<std::vector<std::string>>();
    if (j.contains("rack")) {
      const auto& r = j.at("rack");
      if (r.contains("slots")) {
        cfg.rack.slots.clear();
        for (const auto& s : r.at("slots")) cfg.rack.slots.push_back(vec_of(s));
      }
      cfg.rack.slot_half_width = r.value("slot_half_width", cfg.rack.slot_half_width);
      cfg.rack.height = r.value("height", cfg.rack.height);
      cfg.rack.chamfer = r.value("chamfer", cfg.rack.chamfer);
      cfg.rack.chamfer_height = r.value("chamfer_height", cfg.rack.chamfer_height);
      if (r.contains("tilt_slack_deg")) cfg.rack.tilt_slack = deg2rad(r.at("tilt_slack_deg").get<double>());
    }
    if (j.contains("supports")) {
      cfg.supports.clear();
      for (const auto& s : j.at("supports")) {
        cfg.supports.push_back({s.at("name").get<std::string>(), vec_of(s.at("top_center")), s.at("radius").get<double>()});
      }
    }
    if (j.contains("objects")) {
      cfg.objects.clear();
      for (const auto& o : j.at("objects")) {
        ObjectSpec spec;
        spec.shape = shape_from(o.at("shape").get<std::string>());
        spec.label = o.at("label").get<std::string>();
        spec.radius = o.at("radius").get<double>();
        spec.height = o.value("height", 0.0);
        spec.thickness = o.value("thickness", spec.thickness);
        spec.goal = pose_of(o.at("goal"));
        spec.slot = o.value("slot", -1);
        spec.support = o.value("support", -1);
        cfg.objects.push_back(spec);
      }
    }
    if (j.contains("physics")) physics_from(j.at("physics"), cfg.physics);
    if (j.contains("poses")) {
      const auto& p = j.at("poses");
      if (p.contains("scan")) cfg.scan_pose = pose_of(p.at("scan"));
      if (p.contains("clearance")) cfg.clearance_pose = pose_of(p.at("clearance"));
      if (p.contains("origin")) cfg.origin = pose_of(p.at("origin"));
    }
    cfg.pregrasp_offset = j.value("pregrasp_offset", cfg.pregrasp_offset);
    if (j.contains("up")) cfg.up = vec_of(j.at("up")).normalized();
    if (j.contains("grasp_arc_half_angle_deg")) {
      cfg.grasp_arc_half_angle = deg2rad(j.at("grasp_arc_half_angle_deg").get<double>());
    }
    cfg.candidates_per_object = j.value("candidates_per_object", cfg.candidates_per_object);
    cfg.eval_start_sigma = j.value("eval_start_sigma", cfg.eval_start_sigma);
    if (j.contains("eval_start_rot_sigma_deg")) {
      cfg.eval_start_rot_sigma = deg2rad(j.at("eval_start_rot_sigma_deg").get<double>());
    }
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad scene config: ") + e.what());
  }
}

std::string scene_to_json(const SceneConfig& cfg) {
  json j;
  j["scenario"] = to_string(cfg.scenario);
  j["seed"] = cfg.seed;
  j["query"] = cfg.query;
  json slots = json::array();
  for (const auto& s : cfg.rack.slots) slots.push_back(vec_json(s));
  j["rack"] = {{"slots", slots},
               {"slot_half_width", cfg.rack.slot_half_width},
               {"height", cfg.rack.height},
               {"chamfer", cfg.rack.chamfer},
               {"chamfer_height", cfg.rack.chamfer_height},
               {"tilt_slack_deg", rad2deg(cfg.rack.tilt_slack)}};
  json supports = json::array();
  for (const auto& s : cfg.supports) {
    supports.push_back({{"name", s.name}, {"top_center", vec_json(s.top_center)}, {"radius", s.radius}});
  }
  j["supports"] = supports;
  json objects = json::array();
  for (const auto& o : cfg.objects) {
    objects.push_back({{"shape", to_string(o.shape)},
                       {"label", o.label},
                       {"radius", o.radius},
                       {"height", o.height},
                       {"thickness", o.thickness},
                       {"goal", pose_json(o.goal)},
                       {"slot", o.slot},
                       {"support", o.support}});
  }
  j["objects"] = objects;
  j["physics"] = physics_json(cfg.physics);
  j["poses"] = {{"scan", pose_json(cfg.scan_pose)},
                {"clearance", pose_json(cfg.clearance_pose)},
                {"origin", pose_json(cfg.origin)}};
  j["pregrasp_offset"] = cfg.pregrasp_offset;
  j["up"] = vec_json(cfg.up);
  j["grasp_arc_half_angle_deg"] = rad2deg(cfg.grasp_arc_half_angle);
  j["candidates_per_object"] = cfg.candidates_per_object;
  j["eval_start_sigma"] = cfg.eval_start_sigma;
  j["eval_start_rot_sigma_deg"] = rad2deg(cfg.eval_start_rot_sigma);
  return j.dump(2);
}

SceneConfig load_scene(const std::string& name_or_path) {
  if (name_or_path == "dishrack") return dishrack_scene();
  if (name_or_path == "table") return table_scene();
  std::ifstream in(name_or_path);
  if (!in) throw ConfigError("cannot open scene config '" + name_or_path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return scene_from_json(ss.str());
}

std::uint64_t scene_hash(const SceneConfig& cfg) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : scene_to_json(cfg)) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace pvp
