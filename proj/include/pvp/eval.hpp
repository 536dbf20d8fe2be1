#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pvp/collect.hpp"
#include "pvp/policy.hpp"

namespace pvp {

/// Maps the current frame stack (and world, for scripted controllers) to an action.
using PolicyFn = std::function<Action(std::span<const float> stack, const WorldState& world, Rng& rng)>;

PolicyFn policy_fn(const PolicyParams& p, bool low_noise = true);

struct RolloutResult {
  bool success = false;
  bool released = false;
  int steps = 0;
  double position_error = 0.0;  // m
  double rotation_error = 0.0;  // rad
  bool settled = false;         // released and resting, whatever the error
  bool operator==(const RolloutResult&) const = default;

  /// Success with both tolerances multiplied by `scale`.
  bool success_at(double scale, const PhysicsConstants& p) const {
    return settled && position_error <= scale * p.eps_pos && rotation_error <= scale * p.eps_rot;
  }
};

constexpr int kMaxRolloutSteps = 60;

/// Closed-loop control from `start` until the gripper opens or max_steps elapse.
RolloutResult rollout(const PolicyFn& policy, WorldState start, std::uint64_t seed, int max_steps = kMaxRolloutSteps,
                      int frame_stack = 4);
/// Fresh evaluation-mode world for `seed`, then low-noise control with `p`.
RolloutResult rollout(const PolicyParams& p, const SceneConfig& cfg, std::uint64_t seed,
                      int max_steps = kMaxRolloutSteps);

/// Tolerance multipliers of the threshold sensitivity report.
constexpr std::array<double, 2> kToleranceScales{0.5, 1.5};

/// Runs fn(0..n-1) on up to `jobs` threads; callers write results by index.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

/// Per-episode seed of a batch; independent of job scheduling.
std::uint64_t episode_seed(std::uint64_t batch_seed, std::size_t index);

std::vector<EpisodeResult> collect_batch(const SceneConfig& cfg, const CollectConfig& cc, Source source,
                                         std::uint64_t batch_seed, std::size_t episodes, int jobs = 1);

struct ConditionResult {
  std::string name;
  std::vector<std::uint64_t> failures;                 // per seed
  std::vector<std::array<std::uint64_t, 4>> causes;    // per seed, indexed by FailureCause
  std::vector<std::vector<std::uint8_t>> outcomes;     // per seed, per episode success bits
  double mean = 0.0;
  double std = 0.0;  // sample std over seeds
  std::array<std::vector<std::uint64_t>, 2> scaled_failures;  // per seed, at kToleranceScales
};

struct RobustnessReport {
  std::vector<std::uint64_t> seeds;
  std::size_t episodes = 0;
  std::array<ConditionResult, 3> conditions;  // naive, ccg, ccg+tr
  std::uint64_t scene_hash = 0;
  double runtime_s = 0.0;
};

RobustnessReport ablate_robustness(const SceneConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                   std::size_t episodes = 128, int jobs = 1, const CollectConfig& base = {});

struct CellResult {
  std::string name;
  std::vector<std::vector<std::uint8_t>> outcomes;  // per seed, per rollout
  std::vector<double> rates;                        // per seed, percent, recomputed from outcomes
  std::array<std::vector<std::vector<std::uint8_t>>, 2> scaled_outcomes;  // at kToleranceScales
  std::array<double, 2> scaled_mean{};
  double mean = 0.0;
  double std = 0.0;
  std::uint64_t successes = 0;
  std::uint64_t rollouts = 0;
};

struct NoiseAblationConfig {
  std::size_t episodes = 128;
  int rollouts = 20;
  TrainConfig det;
  TrainConfig gmm;

  NoiseAblationConfig();
};

struct NoiseReport {
  std::vector<std::uint64_t> seeds;
  NoiseAblationConfig config;
  std::array<CellResult, 4> cells;  // det, det+noise, gmm, gmm+noise
  std::uint64_t scene_hash = 0;
  double runtime_s = 0.0;
};

NoiseReport ablate_noise(const SceneConfig& cfg, const std::vector<std::uint64_t>& seeds,
                         const NoiseAblationConfig& nc = {}, int jobs = 1);

struct KinestheticCompareConfig {
  std::vector<std::size_t> sizes{16, 32, 64, 128};
  int rollouts = 8;
  TrainConfig train;
  bool pvp_noise = true;

  KinestheticCompareConfig();
};

struct ComparePoint {
  std::size_t size = 0;
  CellResult pvp;
  CellResult kinesthetic;
};

struct CompareReport {
  std::vector<std::uint64_t> seeds;
  KinestheticCompareConfig config;
  std::vector<ComparePoint> points;
  std::array<double, 2> pvp_length{};          // mean, std
  std::array<double, 2> kinesthetic_length{};  // mean, std
  std::uint64_t scene_hash = 0;
  double runtime_s = 0.0;
};

CompareReport compare_kinesthetic(const SceneConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                  const KinestheticCompareConfig& kc = {}, int jobs = 1);

/// Structured reports; runtime is omitted when `timestamps` is false so reruns are byte-identical.
std::string to_json(const RobustnessReport& r, bool timestamps = true);
std::string to_json(const NoiseReport& r, bool timestamps = true);
std::string to_json(const CompareReport& r, bool timestamps = true);
std::string robustness_csv(const RobustnessReport& r);
std::string noise_csv(const NoiseReport& r);
std::string compare_csv(const CompareReport& r);

/// Cell statistics recomputed from the stored per-rollout outcomes.
void finalize(CellResult& c);

}  // namespace pvp
