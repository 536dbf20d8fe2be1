#include <doctest.h>

#include "pvp/errors.hpp"
#include "pvp/grasp.hpp"
#include "pvp/world.hpp"

using namespace pvp;

TEST_CASE("candidates lie on the exposed rim arc") {
  const SceneConfig cfg = dishrack_scene();
  const WorldState w = reset(cfg, 1);
  Rng rng(2);
  const auto cands = generate_candidates(w, cfg, rng);
  for (std::size_t obj = 0; obj < cfg.objects.size(); ++obj) {
    const ObjectSpec& o = cfg.objects[obj];
    int n = 0;
    for (const auto& c : cands) {
      if (c.object != static_cast<int>(obj)) continue;
      ++n;
      // Rim membership: the contact point is one radius from the disc center, in the disc plane.
      const Vec3 local = inverse(w.objects[obj]).apply(c.pose.translation);
      CHECK(std::abs(local.x()) < 1e-9);
      CHECK(std::abs(local.tail<2>().norm() - o.radius) < 1e-9);
      // Exposed arc: above the tine tops.
      CHECK(c.pose.translation.z() > cfg.rack.slots[obj].z() + cfg.rack.height);
      CHECK(c.depth > 0.0);
      CHECK(c.depth <= cfg.physics.finger_depth);
      CHECK(c.quality >= 0.0);
      CHECK(c.quality <= 1.0);
      CHECK(translation_distance(compose(w.objects[obj], c.local_tcp), c.ee_pose()) < 1e-9);
    }
    CHECK(n >= 8);
  }
}

TEST_CASE("candidate generation is deterministic and empty for an empty scene") {
  const SceneConfig cfg = dishrack_scene();
  const WorldState w = reset(cfg, 1);
  Rng a(3), b(3);
  CHECK(generate_candidates(w, cfg, a) == generate_candidates(w, cfg, b));

  SceneConfig empty = dishrack_scene();
  empty.objects.clear();
  empty.query.clear();
  Rng c(3);
  CHECK(generate_candidates(w, empty, c).empty());
}

TEST_CASE("prune_by_label") {
  const SceneConfig cfg = dishrack_scene();
  Rng rng(4);
  const auto cands = generate_candidates(reset(cfg, 1), cfg, rng);
  const auto green = prune_by_label(cands, LabelQuery::parse("green plate"));
  CHECK(!green.empty());
  for (const auto& c : green) CHECK(c.label == "green plate");
  std::size_t expected = 0;
  for (const auto& c : cands) expected += c.label == "green plate";
  CHECK(green.size() == expected);

  CHECK(prune_by_label(cands, LabelQuery::parse("plate")) == cands);
  CHECK(prune_by_label(cands, LabelQuery::parse("mug")).empty());
  // Idempotent filter.
  CHECK(prune_by_label(green, LabelQuery::parse("green plate")) == green);
  const auto two = prune_by_label(cands, LabelQuery::parse("green plate, blue plate"));
  CHECK(two.size() > green.size());
}

TEST_CASE("LabelQuery parsing") {
  const LabelQuery q = LabelQuery::parse("green plate,,  bowl ");
  REQUIRE(q.labels.size() == 2);
  CHECK(q.matches("Green Plate"));
  CHECK(q.matches("bowl"));
  CHECK_FALSE(q.matches("cup"));
}

TEST_CASE("select_grasp is uniform") {
  std::vector<GraspCandidate> cands(4);
  for (int i = 0; i < 4; ++i) cands[i].object = i;
  Rng rng(5);
  std::array<int, 4> counts{};
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[select_grasp(cands, rng).object];
  for (int c : counts) CHECK(std::abs(static_cast<double>(c) / n - 0.25) < 0.02 * 0.25);

  std::vector<GraspCandidate> one(1);
  one[0].object = 9;
  Rng r2(6);
  CHECK(select_grasp(one, r2).object == 9);
  Rng r3(7), r4(7);
  CHECK(&select_grasp(cands, r3) == &select_grasp(cands, r4));
  CHECK_THROWS_AS(select_grasp({}, r2), NoGraspError);
}

TEST_CASE("pregrasp_of") {
  const Pose g(Quat(Eigen::AngleAxisd(0.4, Vec3(1, 2, 3).normalized())), Vec3(0.3, -0.1, 0.10));
  const Pose p = pregrasp_of(g, 0.08);
  CHECK(p.translation.z() == doctest::Approx(0.18));
  CHECK(p.translation.x() == g.translation.x());
  CHECK(p.translation.y() == g.translation.y());
  CHECK(p.rotation.coeffs() == g.rotation.coeffs());
  CHECK_THROWS_AS(pregrasp_of(g, 0.0), DomainError);
}

TEST_CASE("approach through the pregrasp captures every selected grasp") {
  const SceneConfig cfg = dishrack_scene();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    WorldState w = reset(cfg, seed);
    Rng rng(seed);
    const auto cands = prune_by_label(generate_candidates(w, cfg, rng), LabelQuery{cfg.query});
    const GraspCandidate& g = select_grasp(cands, rng);
    const StiffnessSetting k = StiffnessSetting::compliant_full(cfg.physics);
    const Pose pre = pregrasp_of(g, cfg.pregrasp_offset);
    const Pose start = w.ee;
    for (int i = 1; i <= 10; ++i) w = move_to(w, interpolate(start, pre, i / 10.0), k);
    for (int i = 1; i <= 10; ++i) w = move_to(w, interpolate(pre, g.ee_pose(), i / 10.0), k);
    CHECK(close_gripper(w, k, g).failure == FailureCause::none);
  }
}
