#include <algorithm>
#include <cmath>

#include "pvp/world.hpp"

namespace pvp {

namespace {

constexpr double kCell = 0.01;      // m per raster cell at the EE image plane
constexpr double kDepthRef = 0.05;  // m, inverse-depth scale

class Rasterizer {
 public:
  Rasterizer(ObservationFrame& frame, const Pose& ee) : frame_(frame), world_to_ee_(inverse(ee)) {}

  void point(const Vec3& world, int channel, float value) {
    const Vec3 p = world_to_ee_.apply(world);
    if (!(p.z() > 1e-6)) return;
    const int col = static_cast<int>(std::floor(p.x() / kCell + ObservationFrame::kWidth / 2.0));
    const int row = static_cast<int>(std::floor(p.y() / kCell + ObservationFrame::kHeight / 2.0));
    if (row < 0 || row >= ObservationFrame::kHeight || col < 0 || col >= ObservationFrame::kWidth) return;
    float& v = frame_.raster[(row * ObservationFrame::kWidth + col) * ObservationFrame::kChannels + channel];
    v = std::max(v, value);
    float& d = frame_.raster[(row * ObservationFrame::kWidth + col) * ObservationFrame::kChannels + 2];
    d = std::max(d, static_cast<float>(std::min(1.0, kDepthRef / p.z())));
  }

  void segment(const Vec3& a, const Vec3& b, int channel, float value) {
    const int n = std::max(1, static_cast<int>(std::ceil((b - a).norm() / (kCell / 2.0))));
    for (int i = 0; i <= n; ++i) point(a + (b - a) * (static_cast<double>(i) / n), channel, value);
  }

  void ring(const Pose& frame, const Vec3& center, const Vec3& u, const Vec3& v, double radius, int channel,
            float value) {
    if (radius <= 0.0) {
      point(frame.apply(center), channel, value);
      return;
    }
    const int n = std::max(8, static_cast<int>(std::ceil(2.0 * kPi * radius / (kCell / 2.0))));
    for (int i = 0; i < n; ++i) {
      const double a = 2.0 * kPi * i / n;
      point(frame.apply(center + radius * (std::cos(a) * u + std::sin(a) * v)), channel, value);
    }
  }

  void object(const ObjectSpec& o, const Pose& pose, int channel, float value) {
    if (o.shape == ShapeKind::plate) {
      for (int k = 0; k <= 3; ++k) ring(pose, Vec3::Zero(), Vec3::UnitY(), Vec3::UnitZ(), o.radius * k / 3.0, channel, value);
      return;
    }
    ring(pose, Vec3(0.0, 0.0, o.height), Vec3::UnitX(), Vec3::UnitY(), o.radius, channel, value);
    ring(pose, Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY(), 0.6 * o.radius, channel, value);
    ring(pose, Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY(), 0.0, channel, value);
  }

 private:
  ObservationFrame& frame_;
  Pose world_to_ee_;
};

}  // namespace

ObservationFrame render_observation(const WorldState& s) {
  ObservationFrame f;
  const SceneConfig& cfg = s.cfg();
  Rasterizer r(f, s.ee);

  if (cfg.scenario == Scenario::dishrack) {
    const double y = 0.14;
    for (const auto& slot : cfg.rack.slots) {
      for (double side : {-1.0, 1.0}) {
        const Vec3 off(side * cfg.rack.slot_half_width, 0.0, cfg.rack.height);
        r.segment(slot + off + Vec3(0.0, -y, 0.0), slot + off + Vec3(0.0, y, 0.0), 1, 0.5f);
      }
    }
  }
  for (const auto& sup : cfg.supports) {
    r.ring(Pose::identity(), sup.top_center, Vec3::UnitX(), Vec3::UnitY(), sup.radius, 1, 0.5f);
  }
  for (std::size_t i = 0; i < cfg.objects.size(); ++i) {
    const Pose& goal = cfg.objects[i].goal;
    bool occupied = false;
    for (std::size_t j = 0; j < s.objects.size(); ++j) {
      if (s.attached && *s.attached == static_cast<int>(j)) continue;
      if (translation_distance(s.objects[j], goal) <= cfg.physics.eps_pos) occupied = true;
    }
    if (!occupied) r.object(cfg.objects[i], goal, 1, 1.0f);
  }
  for (std::size_t i = 0; i < s.objects.size(); ++i) r.object(cfg.objects[i], s.objects[i], 0, 1.0f);

  const Vec6 rel = relative_action(cfg.origin, s.ee).vector();
  for (int k = 0; k < 6; ++k) f.proprio[k] = static_cast<float>(rel[k]);
  f.proprio[6] = s.gripper == GripperState::closed ? 1.0f : 0.0f;
  return f;
}

}  // namespace pvp
