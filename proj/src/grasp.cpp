#include "pvp/grasp.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "pvp/errors.hpp"
#include "pvp/world.hpp"

namespace pvp {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

Quat from_axes(const Vec3& x, const Vec3& y, const Vec3& z) {
  Mat3 r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return canonical(Quat(r));
}

}  // namespace

LabelQuery LabelQuery::parse(const std::string& csv) {
  LabelQuery q;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) q.labels.push_back(item);
  }
  return q;
}

bool LabelQuery::matches(const std::string& label) const {
  const std::string l = lower(label);
  return std::any_of(labels.begin(), labels.end(),
                     [&](const std::string& q) { return l.find(lower(q)) != std::string::npos; });
}

Pose rim_frame(const ObjectSpec& o, double psi) {
  const double s = std::sin(psi), c = std::cos(psi);
  if (o.shape == ShapeKind::plate) {
    const Vec3 z(0.0, -s, -c);
    const Vec3 x = Vec3::UnitX();
    return {from_axes(x, z.cross(x), z), Vec3(0.0, o.radius * s, o.radius * c)};
  }
  const Vec3 z(0.0, 0.0, -1.0);
  const Vec3 x(c, s, 0.0);
  return {from_axes(x, z.cross(x), z), Vec3(o.radius * c, o.radius * s, o.height)};
}

std::pair<double, double> graspable_arc(const SceneConfig& cfg, const ObjectSpec& o) {
  if (o.shape != ShapeKind::plate) return {-kPi, kPi};
  double half = cfg.grasp_arc_half_angle;
  if (cfg.scenario == Scenario::dishrack) {
    // The fingers must clear the tines: rim height above the floor > tine height + finger depth.
    const double c = (cfg.rack.height + cfg.physics.finger_depth - o.radius) / o.radius;
    if (c >= 1.0) return {0.0, 0.0};
    if (c > -1.0) half = std::min(half, std::acos(c));
  }
  return {-half, half};
}

std::vector<GraspCandidate> generate_candidates(const WorldState& world, const SceneConfig& cfg, Rng& rng) {
  std::vector<GraspCandidate> out;
  const auto& p = cfg.physics;
  for (std::size_t i = 0; i < cfg.objects.size() && i < world.objects.size(); ++i) {
    if (world.attached && *world.attached == static_cast<int>(i)) continue;
    const ObjectSpec& o = cfg.objects[i];
    const auto [lo, hi] = graspable_arc(cfg, o);
    if (!(hi > lo)) continue;
    const int n = cfg.candidates_per_object;
    for (int k = 0; k < n; ++k) {
      GraspCandidate g;
      g.object = static_cast<int>(i);
      g.label = o.label;
      g.rim_angle = lo + (k + rng.uniform01()) / n * (hi - lo);
      const bool shallow = rng.bernoulli(p.shallow_fraction);
      g.depth = (shallow ? rng.uniform(0.3, 0.65) : rng.uniform(0.85, 1.0)) * p.finger_depth;
      g.quality = g.depth / p.finger_depth;
      const Pose rim = rim_frame(o, g.rim_angle);
      g.local_tcp = compose(rim, Pose::from_translation(Vec3(0.0, 0.0, g.depth)));
      g.pose = compose(world.objects[i], rim);
      out.push_back(std::move(g));
    }
  }
  return out;
}

std::vector<GraspCandidate> prune_by_label(const std::vector<GraspCandidate>& cands, const LabelQuery& q) {
  std::vector<GraspCandidate> out;
  for (const auto& c : cands) {
    if (q.matches(c.label)) out.push_back(c);
  }
  return out;
}

const GraspCandidate& select_grasp(const std::vector<GraspCandidate>& cands, Rng& rng) {
  if (cands.empty()) throw NoGraspError("no grasp candidates left to select from");
  return cands[rng.index(cands.size())];
}

Pose pregrasp_of(const Pose& grasp, double offset, const Vec3& up) {
  if (!(offset > 0.0)) throw DomainError("pregrasp offset must be positive");
  Pose out = grasp;
  out.translation += up.normalized() * offset;
  return out;
}

Pose pregrasp_of(const GraspCandidate& g, double offset, const Vec3& up) { return pregrasp_of(g.pose, offset, up); }

}  // namespace pvp
