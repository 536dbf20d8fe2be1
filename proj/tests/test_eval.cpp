#include <doctest.h>

#include <json.hpp>

#include "pvp/errors.hpp"
#include "pvp/eval.hpp"

using namespace pvp;

namespace {

PolicyFn replay_policy(const Episode& e) {
  auto step = std::make_shared<std::size_t>(0);
  return [&e, step](std::span<const float>, const WorldState&, Rng&) {
    return *step < e.actions.size() ? e.actions[(*step)++] : Action::open();
  };
}

Action random_action(Rng& rng) {
  Action a;
  for (int d = 0; d < 3; ++d) a.delta[d] = rng.normal(0.03);
  for (int d = 3; d < 6; ++d) a.delta[d] = rng.normal(0.2);
  a.gripper = rng.uniform01() < 0.9;
  return a;
}

}  // namespace

TEST_CASE("stored expert actions succeed when replayed through rollout") {
  const SceneConfig cfg = dishrack_scene();
  CollectConfig cc;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const Episode e = run_pvp_episode(cfg, cc, seed).episode;
    REQUIRE(e.meta.success);
    const RolloutResult r = rollout(replay_policy(e), place_start_world(cfg, e.meta), seed);
    CHECK(r.success);
    CHECK(r.released);
    CHECK(r.settled);
    CHECK(r.steps == static_cast<int>(e.actions.size()) - cc.n_open + 1);
    CHECK(r.success_at(1.0, cfg.physics) == r.success);
  }
}

TEST_CASE("random actions almost never place the object") {
  const SceneConfig cfg = dishrack_scene();
  const PolicyFn random = [](std::span<const float>, const WorldState&, Rng& rng) { return random_action(rng); };
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) ok += rollout(random, reset(cfg, seed, WorldMode::evaluation), seed).success;
  CHECK(ok < 5);
}

TEST_CASE("rollout is deterministic in policy and seed") {
  const SceneConfig cfg = dishrack_scene();
  const PolicyFn random = [](std::span<const float>, const WorldState&, Rng& rng) { return random_action(rng); };
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const WorldState w = reset(cfg, seed, WorldMode::evaluation);
    CHECK(rollout(random, w, seed) == rollout(random, w, seed));
  }
  const PolicyFn hold = [](std::span<const float>, const WorldState&, Rng&) { return Action{}; };
  const RolloutResult r = rollout(hold, reset(cfg, 1, WorldMode::evaluation), 1);
  CHECK(r.steps == kMaxRolloutSteps);
  CHECK_FALSE(r.released);
  CHECK_FALSE(r.success);
}

TEST_CASE("tolerance scaling is monotone") {
  PhysicsConstants p;
  RolloutResult r;
  r.settled = true;
  r.position_error = 0.8 * p.eps_pos;
  r.rotation_error = 0.2 * p.eps_rot;
  CHECK(r.success_at(1.0, p));
  CHECK_FALSE(r.success_at(0.5, p));
  CHECK(r.success_at(1.5, p));
  r.settled = false;
  CHECK_FALSE(r.success_at(1.5, p));
}

TEST_CASE("finalize recomputes rates from stored outcomes") {
  CellResult c;
  c.outcomes = {{1, 1, 0, 0}, {1, 1, 1, 1}, {0, 0, 0, 1}};
  c.scaled_outcomes[0] = {{0, 0, 0, 0}, {1, 0, 0, 0}, {0, 0, 0, 0}};
  c.scaled_outcomes[1] = c.outcomes;
  c.mean = 99.0;
  c.successes = 1234;
  finalize(c);
  CHECK(c.successes == 7);
  CHECK(c.rollouts == 12);
  REQUIRE(c.rates.size() == 3);
  CHECK(c.rates[0] == 50.0);
  CHECK(c.rates[1] == 100.0);
  CHECK(c.rates[2] == 25.0);
  CHECK(c.mean == doctest::Approx(175.0 / 3));
  CHECK(c.std == doctest::Approx(std::sqrt((std::pow(50 - 175.0 / 3, 2) + std::pow(100 - 175.0 / 3, 2) +
                                            std::pow(25 - 175.0 / 3, 2)) / 2)));
  CHECK(c.scaled_mean[0] == doctest::Approx(100.0 / 12));
  CHECK(c.scaled_mean[1] == doctest::Approx(700.0 / 12));
}

TEST_CASE("parallel_for covers every index and rethrows") {
  std::vector<int> hit(50, 0);
  parallel_for(50, 4, [&](std::size_t i) { hit[i] += 1; });
  for (int h : hit) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) { if (i == 7) throw std::runtime_error("x"); }),
                  std::runtime_error);
}

TEST_CASE("robustness report embeds its configuration and reproduces") {
  const SceneConfig cfg = dishrack_scene();
  const std::vector<std::uint64_t> seeds{4, 9, 11};
  const RobustnessReport a = ablate_robustness(cfg, seeds, 6);
  const RobustnessReport b = ablate_robustness(cfg, seeds, 6, 3);
  CHECK(to_json(a, false) == to_json(b, false));
  CHECK(robustness_csv(a) == robustness_csv(b));
  const auto j = nlohmann::json::parse(to_json(a, false));
  CHECK(j.at("seeds").get<std::vector<std::uint64_t>>() == seeds);
  CHECK(j.at("episodes_per_seed") == 6);
  CHECK(j.at("scene_hash") == scene_hash(cfg));
  CHECK_FALSE(j.contains("runtime_s"));
  CHECK(nlohmann::json::parse(to_json(a, true)).contains("runtime_s"));
  for (const auto& c : a.conditions) {
    REQUIRE(c.failures.size() == seeds.size());
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      std::uint64_t miss = 0;
      for (auto bit : c.outcomes[s]) miss += !bit;
      CHECK(miss == c.failures[s]);
      CHECK(c.failures[s] <= 6);
      // A looser tolerance never adds failures.
      CHECK(c.scaled_failures[1][s] <= c.failures[s]);
      CHECK(c.scaled_failures[0][s] >= c.failures[s]);
    }
  }
  CHECK_THROWS_AS(ablate_robustness(cfg, {}, 6), ConfigError);
}
