#include <doctest.h>

#include "oracles.hpp"
#include "pvp/errors.hpp"
#include "pvp/se3.hpp"

using namespace pvp;

namespace {

bool near(const Mat4& a, const Mat4& b, double tol) { return (a - b).cwiseAbs().maxCoeff() <= tol; }

bool near(const Pose& a, const Pose& b, double tol) {
  return near(oracle::matrix_of(a), oracle::matrix_of(b), tol);
}

}  // namespace

TEST_CASE("compose identity and inverse") {
  Rng rng(1);
  const Pose p = oracle::random_pose(rng);
  CHECK(near(compose(Pose::identity(), p), p, 1e-12));
  CHECK(near(compose(p, inverse(p)), Pose::identity(), 1e-9));
}

TEST_CASE("compose and inverse match the matrix oracle") {
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const Pose a = oracle::random_pose(rng), b = oracle::random_pose(rng), c = oracle::random_pose(rng);
    CHECK(near(oracle::matrix_of(compose(a, b)), oracle::matrix_of(a) * oracle::matrix_of(b), 1e-9));
    CHECK(near(oracle::matrix_of(inverse(a)), oracle::matrix_of(a).inverse(), 1e-9));
    CHECK(near(compose(compose(a, b), c), compose(a, compose(b, c)), 1e-9));
    CHECK(std::abs(compose(a, b).rotation.norm() - 1.0) < 1e-9);
    CHECK(compose(a, b).rotation.w() >= 0.0);
  }
}

TEST_CASE("inverse of a pure translation flips its sign") {
  const Pose p = inverse(Pose::from_translation(Vec3(0, 0, 0.1)));
  CHECK(p.translation.isApprox(Vec3(0, 0, -0.1)));
  CHECK(rotation_distance(p.rotation, Quat::Identity()) == 0.0);
  CHECK(inverse(Pose::identity()) == Pose::identity());
}

TEST_CASE("relative_action") {
  const Pose from = Pose::from_translation(Vec3(0, 0, 0.10));
  const Pose to = Pose::from_translation(Vec3(0, 0, 0.05));
  const RelPose r = relative_action(from, to);
  CHECK(r.translation.isApprox(Vec3(0, 0, -0.05), 1e-12));
  CHECK(r.rotation.angle == 0.0);

  const RelPose same = relative_action(from, from);
  CHECK(same.translation.norm() == 0.0);
  CHECK(same.rotation.angle == 0.0);

  const Pose rz(Quat(Eigen::AngleAxisd(kPi / 2, Vec3::UnitZ())), Vec3(0.1, 0.2, 0.3));
  const Mat4 expect = oracle::matrix_of(rz).inverse() * oracle::matrix_of(Pose::identity());
  CHECK(near(oracle::matrix_of(relative_action(rz, Pose::identity()).to_pose()), expect, 1e-9));
}

TEST_CASE("relative_action chain reconstructs the last pose") {
  Rng rng(3);
  for (int n : {1, 5, 40}) {
    std::vector<Pose> ps;
    for (int i = 0; i <= n; ++i) ps.push_back(oracle::random_pose(rng));
    Pose acc = ps[0];
    for (int i = 0; i < n; ++i) acc = compose(acc, relative_action(ps[i], ps[i + 1]).to_pose());
    CHECK(near(acc, ps[n], 1e-8 * n));
  }
}

TEST_CASE("RelPose round trip and canonical rotation vector") {
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const Pose p = oracle::random_pose(rng);
    const RelPose r = RelPose::from_pose(p);
    CHECK(r.rotation.angle >= 0.0);
    CHECK(r.rotation.angle <= kPi);
    CHECK(std::abs(r.rotation.axis.norm() - 1.0) < 1e-9);
    CHECK(near(r.to_pose(), p, 1e-9));
    const RelPose v = RelPose::from_vector(r.vector());
    CHECK(near(v.to_pose(), p, 1e-9));
  }
}

TEST_CASE("interpolate") {
  Rng rng(5);
  const Pose a = oracle::random_pose(rng), b = oracle::random_pose(rng);
  CHECK(interpolate(a, b, 0.0) == a);
  CHECK(near(interpolate(a, b, 1.0), b, 1e-12));
  CHECK_THROWS_AS(interpolate(a, b, -0.1), DomainError);
  CHECK_THROWS_AS(interpolate(a, b, 1.5), DomainError);

  const Pose z90(Quat(Eigen::AngleAxisd(kPi / 2, Vec3::UnitZ())), Vec3(0.2, 0, 0));
  const Pose mid = interpolate(Pose::identity(), z90, 0.5);
  CHECK(mid.rotation.isApprox(Quat(Eigen::AngleAxisd(kPi / 4, Vec3::UnitZ())), 1e-12));
  CHECK(mid.translation.isApprox(Vec3(0.1, 0, 0), 1e-12));

  for (int i = 0; i < 50; ++i) {
    const Pose x = oracle::random_pose(rng), y = oracle::random_pose(rng);
    const Pose o = interpolate(x, y, 0.3);
    const double dab = oracle::angle_of((x.rotation.toRotationMatrix().transpose() * y.rotation.toRotationMatrix()));
    const double dao = oracle::angle_of((x.rotation.toRotationMatrix().transpose() * o.rotation.toRotationMatrix()));
    if (dab > 1e-3) CHECK(std::abs(dao / dab - 0.3) < 1e-9);
  }
}

TEST_CASE("interpolate is rotation continuous") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const Pose a = oracle::random_pose(rng), b = oracle::random_pose(rng);
    const double total = rotation_distance(a.rotation, b.rotation);
    Pose prev = a;
    for (int i = 1; i <= 100; ++i) {
      const Pose cur = interpolate(a, b, i / 100.0);
      CHECK(rotation_distance(prev.rotation, cur.rotation) <= total / 100.0 + 1e-9);
      prev = cur;
    }
  }
}

TEST_CASE("perturb_pose with zero noise is the identity map") {
  Rng rng(7);
  NoiseParams zero{0.0, 0.0, 0.0};
  for (int i = 0; i < 100; ++i) {
    const Pose p = oracle::random_pose(rng);
    const Pose q = perturb_pose(p, zero, rng);
    CHECK(q.translation == p.translation);
    CHECK(rotation_distance(q.rotation, p.rotation) < 1e-9);
  }
}

TEST_CASE("perturb_pose translation statistics") {
  Rng rng(8);
  NoiseParams n;
  std::vector<double> x, y, z;
  for (int i = 0; i < 100000; ++i) {
    const Pose q = perturb_pose(Pose::identity(), n, rng);
    x.push_back(q.translation.x());
    y.push_back(q.translation.y());
    z.push_back(q.translation.z());
  }
  for (const auto* v : {&x, &y, &z}) CHECK(std::abs(oracle::sample_std(*v) / 0.005 - 1.0) < 0.03);
}

TEST_CASE("perturb_pose angle distribution matches direct sampling of the literal formula") {
  NoiseParams n;
  n.sigma_t = 0.0;
  n.sigma_e = 0.2;  // large enough that the axis scaling is visible
  Rng rng(9), orng(10);
  std::vector<double> got, ref;
  for (int i = 0; i < 100000; ++i) {
    got.push_back(rotation_distance(perturb_pose(Pose::identity(), n, rng).rotation, Quat::Identity()));
    const double dth = orng.normal(n.sigma_theta);
    const Vec3 e(1.0 + orng.normal(n.sigma_e), orng.normal(n.sigma_e), orng.normal(n.sigma_e));
    ref.push_back(std::abs(dth) * e.norm());
  }
  std::sort(got.begin(), got.end());
  std::sort(ref.begin(), ref.end());
  // Two-sample Kolmogorov-Smirnov statistic; critical value at alpha=0.001 is about 1.95*sqrt(2/n).
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < got.size() && j < ref.size()) {
    if (got[i] <= ref[j]) ++i; else ++j;
    d = std::max(d, std::abs(static_cast<double>(i) - static_cast<double>(j)) / got.size());
  }
  CHECK(d < 1.95 * std::sqrt(2.0 / got.size()));
}

TEST_CASE("pose binary layout") {
  Rng rng(11);
  const Pose p = oracle::random_pose(rng);
  std::vector<std::uint8_t> bytes;
  append_bytes(bytes, p);
  REQUIRE(bytes.size() == 56);
  double qw;
  std::memcpy(&qw, bytes.data(), 8);
  CHECK(qw == p.rotation.w());
  CHECK(read_pose(bytes) == p);
  std::vector<std::uint8_t> rb;
  const RelPose r = RelPose::from_pose(p);
  append_bytes(rb, r);
  CHECK(rb.size() == 48);
  CHECK(read_relpose(rb).vector() == r.vector());
}

TEST_CASE("noise parameters validate") {
  NoiseParams n;
  n.sigma_t = -1.0;
  CHECK_THROWS(n.validate());
}
