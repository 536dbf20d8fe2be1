#include <doctest.h>

#include "pvp/collect.hpp"
#include "pvp/dataset.hpp"
#include "pvp/eval.hpp"
#include "pvp/grasp.hpp"

using namespace pvp;

namespace {

CollectConfig quick(bool ccg, bool tr, bool noise) {
  CollectConfig cc;
  cc.ccg = ccg;
  cc.tr = tr;
  cc.noise_aug = noise;
  cc.render = false;
  return cc;
}

bool identity_closed(const Action& a) { return a.gripper == 1 && a.delta.isZero(); }

// Runs of identity closed actions that are not the hold right before the release.
int idle_runs(const Episode& e, int n_open) {
  const int closed = static_cast<int>(e.actions.size()) - n_open;
  int end = closed;
  while (end > 0 && identity_closed(e.actions[end - 1])) --end;
  int runs = 0;
  for (int i = 0; i < end; ++i) {
    if (identity_closed(e.actions[i]) && (i == 0 || !identity_closed(e.actions[i - 1]))) ++runs;
  }
  return runs;
}

}  // namespace

TEST_CASE("tactile_regrasp") {
  const SceneConfig cfg = dishrack_scene();
  WorldState w = reset(cfg, 1);
  w.gripper = GripperState::closed;
  w.attached = 1;
  TactilePatch deep;
  deep.contact_fraction = 0.9;
  CHECK_FALSE(tactile_regrasp(w, deep).has_value());

  w.grasp_depth = 0.5 * cfg.physics.finger_depth;
  const TactilePatch half = read_tactile(w);
  REQUIRE(half.centroid.x() == doctest::Approx(0.006));
  const auto fix = tactile_regrasp(w, half);
  REQUIRE(fix.has_value());
  CHECK(fix->translation.z() == doctest::Approx(0.006));
  CHECK(fix->translation.head<2>().norm() == 0.0);
  CHECK(fix->rotation.angle == 0.0);
}

TEST_CASE("nominal episode with CCG and TR succeeds") {
  const SceneConfig cfg = dishrack_scene();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const EpisodeResult r = run_pvp_episode(cfg, quick(true, true, false), seed);
    CHECK(r.episode.meta.success);
    CHECK(r.episode.meta.regrasp_count <= 1);
    CHECK(r.telemetry.peak_preload < cfg.physics.preload_crit);
    CHECK(r.telemetry.retrieval_contact_fraction >= cfg.physics.f_stable);
  }
}

TEST_CASE("episode structure") {
  const SceneConfig cfg = dishrack_scene();
  CollectConfig cc;
  cc.noise_aug = true;
  const EpisodeResult r = run_pvp_episode(cfg, cc, 3);
  const Episode& e = r.episode;
  REQUIRE(e.actions.size() > static_cast<std::size_t>(cc.n_open));
  CHECK(e.frames.size() == e.actions.size() + 1);
  CHECK(e.length() == r.telemetry.sparse_length - 1 + cc.n_open);
  for (std::size_t i = e.actions.size() - cc.n_open; i < e.actions.size(); ++i) CHECK(e.actions[i] == Action::open());
  for (std::size_t i = 0; i + cc.n_open < e.actions.size(); ++i) CHECK(e.actions[i].gripper == 1);
  CHECK(e.meta.noise_aug);
  // Frame stack: current first, the first frame replicated into the missing history.
  const auto s0 = e.stack(0, 4);
  CHECK(s0.size() == 4u * ObservationFrame::kSize);
  CHECK(std::equal(s0.begin(), s0.begin() + ObservationFrame::kSize, s0.begin() + 3 * ObservationFrame::kSize));
  CHECK(run_pvp_episode(cfg, cc, 3).episode == e);
}

TEST_CASE("noise augmentation leaves the approach tail untouched") {
  const SceneConfig cfg = dishrack_scene();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Episode clean = run_pvp_episode(cfg, quick(true, true, false), seed).episode;
    const Episode noisy = run_pvp_episode(cfg, quick(true, true, true), seed).episode;
    REQUIRE(clean.actions.size() == noisy.actions.size());
    const std::size_t poses = clean.actions.size() - 5 + 1;
    const std::size_t tail = poses - perturbed_count(poses, 0.75);
    // Actions between two unperturbed waypoints, then the open block.
    for (std::size_t i = clean.actions.size() - 5 - (tail - 1); i < clean.actions.size(); ++i) {
      CHECK(clean.actions[i] == noisy.actions[i]);
    }
    CHECK_FALSE(clean.actions.front() == noisy.actions.front());
  }
}

TEST_CASE("stored actions replay to the goal") {
  const SceneConfig cfg = dishrack_scene();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Episode e = run_pvp_episode(cfg, quick(true, true, false), seed).episode;
    REQUIRE(e.meta.success);
    const WorldState w = replay_actions(cfg, e);
    CHECK(check_success(w, e.meta.target));
  }
}

TEST_CASE("stiff grasping stores preload and misplaces some episodes") {
  const SceneConfig cfg = dishrack_scene();
  int high_preload = 0, misplaced_high = 0, misplaced_low = 0;
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    const EpisodeResult r = run_pvp_episode(cfg, quick(false, true, false), seed);
    if (r.telemetry.peak_preload > cfg.physics.preload_crit) {
      ++high_preload;
      misplaced_high += !r.telemetry.success;
    } else {
      misplaced_low += !r.telemetry.success;
    }
  }
  CHECK(high_preload > 0);
  // The shift direction is random, so a few shifted episodes still land inside tolerance.
  CHECK(misplaced_high >= 0.75 * high_preload);
  CHECK(misplaced_low == 0);
}

TEST_CASE("telemetry merge is order independent") {
  const SceneConfig cfg = dishrack_scene();
  const auto rs = collect_batch(cfg, quick(false, false, false), Source::pvp, 5, 40);
  Telemetry a, b, c;
  for (std::size_t i = 0; i < rs.size(); ++i) (i % 2 ? a : b).add(rs[i].telemetry);
  for (auto it = rs.rbegin(); it != rs.rend(); ++it) c.add(it->telemetry);
  Telemetry ab = a, ba = b;
  ab.merge(b);
  ba.merge(a);
  CHECK(ab.episodes == 40);
  CHECK(ab.failures == ba.failures);
  CHECK(ab.failures == c.failures);
  CHECK(ab.successes == c.successes);
  CHECK(ab.max_peak_preload == c.max_peak_preload);
}

TEST_CASE("collect_batch does not depend on the job count") {
  const SceneConfig cfg = dishrack_scene();
  const auto one = collect_batch(cfg, quick(true, true, true), Source::pvp, 9, 12, 1);
  const auto four = collect_batch(cfg, quick(true, true, true), Source::pvp, 9, 12, 4);
  for (std::size_t i = 0; i < one.size(); ++i) CHECK(one[i].episode == four[i].episode);
}

TEST_CASE("kinesthetic demonstrations") {
  const SceneConfig cfg = dishrack_scene();
  // Pooled over four batches: the std of a single 128-episode batch wanders by about 6 percent.
  std::vector<EpisodeResult> rs;
  for (std::uint64_t b = 21; b < 25; ++b) {
    for (auto& r : collect_batch(cfg, quick(true, true, false), Source::kinesthetic, b, 128)) rs.push_back(std::move(r));
  }
  std::vector<double> lens;
  int with_idle = 0, ok = 0;
  for (const auto& r : rs) {
    lens.push_back(static_cast<double>(r.episode.length()));
    with_idle += idle_runs(r.episode, 5) >= 1;
    ok += r.episode.meta.success;
    CHECK(r.episode.meta.source == Source::kinesthetic);
  }
  const LengthStats s = length_stats(lens);
  CHECK(std::abs(s.mean / 41.66 - 1.0) <= 0.10);
  CHECK(std::abs(s.std / 5.69 - 1.0) <= 0.10);
  CHECK(with_idle >= 0.8 * rs.size());
  CHECK(ok == static_cast<int>(rs.size()));

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Episode k = run_kinesthetic_episode(cfg, quick(true, true, false), seed, KinestheticConfig::sanity()).episode;
    const Episode p = run_pvp_episode(cfg, quick(true, true, false), seed).episode;
    CHECK(k.actions == p.actions);
  }
}

TEST_CASE("collect config validation") {
  CollectConfig cc;
  cc.dt = 0.0;
  CHECK_THROWS(cc.validate());
  CollectConfig f;
  f.noise_fraction = 1.5;
  CHECK_THROWS(f.validate());
}
