#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "pvp/rng.hpp"

namespace pvp {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Quat = Eigen::Quaterniond;

inline constexpr double kPi = 3.14159265358979323846;
constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Normalizes and flips the quaternion into the w >= 0 hemisphere.
Quat canonical(const Quat& q);

/// Axis-angle rotation; angle in [0, pi], axis unit length.
struct RotVec {
  Vec3 axis = Vec3::UnitX();
  double angle = 0.0;

  Vec3 vector() const { return axis * angle; }

  /// Canonical form of theta * e. Zero rotations get the x axis.
  static RotVec from_vector(const Vec3& v);
  static RotVec from_quaternion(const Quat& q);
  Quat quaternion() const;
};

/// Rigid transform. Rotation is kept unit-norm and canonical (w >= 0).
struct Pose {
  Quat rotation = Quat::Identity();
  Vec3 translation = Vec3::Zero();

  Pose() = default;
  Pose(const Quat& q, const Vec3& t) : rotation(canonical(q)), translation(t) {}

  static Pose identity() { return {}; }
  static Pose from_translation(const Vec3& t) { return {Quat::Identity(), t}; }
  static Pose from_matrix(const Mat4& m);

  Mat4 matrix() const;
  Vec3 apply(const Vec3& point) const { return rotation * point + translation; }

  bool operator==(const Pose& other) const {
    return rotation.coeffs() == other.rotation.coeffs() && translation == other.translation;
  }
};

/// Relative pose command: translation plus rotation vector.
struct RelPose {
  Vec3 translation = Vec3::Zero();
  RotVec rotation;

  static RelPose identity() { return {}; }
  static RelPose from_pose(const Pose& p);
  static RelPose from_vector(const Vec6& v);
  Pose to_pose() const;
  /// (tx, ty, tz, theta*ex, theta*ey, theta*ez)
  Vec6 vector() const;
};

/// Gaussian perturbation scales for waypoint noise.
struct NoiseParams {
  double sigma_t = 0.005;               // m
  double sigma_e = 0.005;               // dimensionless axis noise
  double sigma_theta = deg2rad(0.5);    // rad

  void validate() const;
};

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& p);

/// Transform taking `from` to `to` expressed in the `from` frame: from^-1 * to.
RelPose relative_action(const Pose& from, const Pose& to);

/// Linear translation, shortest-arc slerp rotation. Throws DomainError for s outside [0, 1].
Pose interpolate(const Pose& a, const Pose& b, double s);

/// t + dt with dt ~ N(0, sigma_t^2) per axis; rotation vector (theta + dtheta)(e + de)
/// with e + de left unnormalized.
Pose perturb_pose(const Pose& p, const NoiseParams& n, Rng& rng);

/// Geodesic angle between two rotations, radians in [0, pi].
double rotation_distance(const Quat& a, const Quat& b);
double translation_distance(const Pose& a, const Pose& b);

// Little-endian binary layouts: Pose as (qw, qx, qy, qz, tx, ty, tz) f64,
// RelPose as (tx, ty, tz, theta*ex, theta*ey, theta*ez) f64.
std::array<double, 7> to_array(const Pose& p);
Pose pose_from_array(std::span<const double, 7> a);
void append_bytes(std::vector<std::uint8_t>& out, const Pose& p);
void append_bytes(std::vector<std::uint8_t>& out, const RelPose& r);
Pose read_pose(std::span<const std::uint8_t> bytes);
RelPose read_relpose(std::span<const std::uint8_t> bytes);

}  // namespace pvp
