#include "pvp/se3.hpp"

#include <cmath>

#include "pvp/binary_io.hpp"
#include "pvp/errors.hpp"

namespace pvp {

Quat canonical(const Quat& q) {
  Quat out = q.normalized();
  if (out.w() < 0.0) out.coeffs() = -out.coeffs();
  return out;
}

RotVec RotVec::from_vector(const Vec3& v) {
  RotVec r;
  const double n = v.norm();
  if (n == 0.0) return r;
  r.axis = v / n;
  r.angle = n;
  // Wrap into [0, pi]; the axis sign absorbs the remainder.
  r.angle = std::fmod(r.angle, 2.0 * kPi);
  if (r.angle > kPi) {
    r.angle = 2.0 * kPi - r.angle;
    r.axis = -r.axis;
  }
  if (r.angle == 0.0) r.axis = Vec3::UnitX();
  return r;
}

RotVec RotVec::from_quaternion(const Quat& q) {
  const Quat c = canonical(q);
  RotVec r;
  const double vn = c.vec().norm();
  if (vn == 0.0) return r;
  r.angle = 2.0 * std::atan2(vn, c.w());
  r.axis = c.vec() / vn;
  if (c.w() == 0.0) {
    // theta == pi: +e and -e describe the same rotation.
    for (int i = 0; i < 3; ++i) {
      if (r.axis[i] != 0.0) {
        if (r.axis[i] < 0.0) r.axis = -r.axis;
        break;
      }
    }
  }
  return r;
}

Quat RotVec::quaternion() const {
  if (angle == 0.0) return Quat::Identity();
  return canonical(Quat(Eigen::AngleAxisd(angle, axis.normalized())));
}

Pose Pose::from_matrix(const Mat4& m) {
  const Mat3 r = m.topLeftCorner<3, 3>();
  return {Quat(r), m.topRightCorner<3, 1>()};
}

Mat4 Pose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation.toRotationMatrix();
  m.topRightCorner<3, 1>() = translation;
  return m;
}

RelPose RelPose::from_pose(const Pose& p) { return {p.translation, RotVec::from_quaternion(p.rotation)}; }

RelPose RelPose::from_vector(const Vec6& v) { return {v.head<3>(), RotVec::from_vector(v.tail<3>())}; }

Pose RelPose::to_pose() const { return {rotation.quaternion(), translation}; }

Vec6 RelPose::vector() const {
  Vec6 v;
  v << translation, rotation.vector();
  return v;
}

void NoiseParams::validate() const {
  if (!(sigma_t >= 0.0) || !(sigma_e >= 0.0) || !(sigma_theta >= 0.0)) {
    throw ConfigError("noise standard deviations must be non-negative");
  }
}

Pose compose(const Pose& a, const Pose& b) {
  return {a.rotation * b.rotation, a.translation + a.rotation * b.translation};
}

Pose inverse(const Pose& p) {
  const Quat qi = p.rotation.conjugate();
  return {qi, -(qi * p.translation)};
}

RelPose relative_action(const Pose& from, const Pose& to) {
  return RelPose::from_pose(compose(inverse(from), to));
}

Pose interpolate(const Pose& a, const Pose& b, double s) {
  if (!(s >= 0.0 && s <= 1.0)) throw DomainError("interpolation parameter outside [0, 1]");
  if (s == 0.0) return a;
  if (s == 1.0) return b;
  return {a.rotation.slerp(s, b.rotation), a.translation + s * (b.translation - a.translation)};
}

Pose perturb_pose(const Pose& p, const NoiseParams& n, Rng& rng) {
  Pose out = p;
  for (int i = 0; i < 3; ++i) out.translation[i] += rng.normal(n.sigma_t);
  if (n.sigma_e == 0.0 && n.sigma_theta == 0.0) return out;

  const RotVec rv = RotVec::from_quaternion(p.rotation);
  Vec3 axis = rv.axis;
  for (int i = 0; i < 3; ++i) axis[i] += rng.normal(n.sigma_e);
  const double angle = rv.angle + rng.normal(n.sigma_theta);
  out.rotation = RotVec::from_vector(angle * axis).quaternion();
  return out;
}

double rotation_distance(const Quat& a, const Quat& b) {
  const Quat q = a.normalized().conjugate() * b.normalized();
  return 2.0 * std::atan2(q.vec().norm(), std::abs(q.w()));
}

double translation_distance(const Pose& a, const Pose& b) { return (a.translation - b.translation).norm(); }

std::array<double, 7> to_array(const Pose& p) {
  return {p.rotation.w(), p.rotation.x(), p.rotation.y(), p.rotation.z(),
          p.translation.x(), p.translation.y(), p.translation.z()};
}

Pose pose_from_array(std::span<const double, 7> a) {
  // Stored poses are already canonical; renormalizing could flip low bits.
  Pose p;
  p.rotation = Quat(a[0], a[1], a[2], a[3]);
  p.translation = Vec3(a[4], a[5], a[6]);
  return p;
}

void append_bytes(std::vector<std::uint8_t>& out, const Pose& p) {
  for (double v : to_array(p)) bin::put(out, v);
}

void append_bytes(std::vector<std::uint8_t>& out, const RelPose& r) {
  const Vec6 v = r.vector();
  for (int i = 0; i < 6; ++i) bin::put(out, v[i]);
}

Pose read_pose(std::span<const std::uint8_t> bytes) {
  bin::Reader rd(bytes);
  std::array<double, 7> a{};
  for (double& v : a) v = rd.get<double>();
  return pose_from_array(a);
}

RelPose read_relpose(std::span<const std::uint8_t> bytes) {
  bin::Reader rd(bytes);
  Vec6 v;
  for (int i = 0; i < 6; ++i) v[i] = rd.get<double>();
  return RelPose::from_vector(v);
}

}  // namespace pvp
