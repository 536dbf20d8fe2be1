#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "pvp/grasp.hpp"
#include "pvp/rng.hpp"
#include "pvp/scene.hpp"
#include "pvp/trajectory.hpp"
#include "pvp/world.hpp"

namespace pvp {

enum class Source : std::uint8_t { pvp = 0, kinesthetic = 1 };
const char* to_string(Source s);

struct CollectConfig {
  double dt = 0.2;              // s, policy period
  int n_open = 5;               // identity/open steps appended to every episode
  double sigma_tr = 0.025;      // m, clearance sampling spread
  double noise_fraction = 0.75; // leading share of place-order waypoints that get perturbed
  NoiseParams noise;
  bool ccg = true;
  bool tr = true;
  bool noise_aug = false;
  int frame_stack = 4;
  bool render = true;           // ablations that only count failures skip rendering
  double record_rate = 120.0;   // Hz
  double v_lift = 0.03;         // m/s while lifting out of the goal constraint
  double v_lin = 0.06;          // m/s from pregrasp height to clearance
  double v_ang = 1.0;           // rad/s
  int approach_steps = 10;      // interpolation steps per approach segment
  int regrasp_budget = 3;

  void validate() const;
};

struct EpisodeMeta {
  std::uint64_t seed = 0;
  Scenario scenario = Scenario::dishrack;
  Source source = Source::pvp;
  bool noise_aug = false;
  bool ccg = false;
  bool tr = false;
  int regrasp_count = 0;
  bool success = false;
  FailureCause failure = FailureCause::none;
  int target = -1;
  Pose place_start;   // EE pose where the place rollout began
  Pose grasp_offset;  // in-hand object pose at that moment
  bool operator==(const EpisodeMeta&) const = default;
};

/// Place demonstration: frames[i] is the observation before actions[i];
/// frames has one more entry than actions when rendered, none otherwise.
struct Episode {
  EpisodeMeta meta;
  std::vector<ObservationFrame> frames;
  std::vector<Action> actions;

  std::size_t length() const { return actions.size(); }
  /// Frame stack ending at frame i: current first, then older frames; the first frame is replicated.
  std::vector<float> stack(std::size_t i, int depth = 4) const;
  bool operator==(const Episode&) const = default;
};

struct EpisodeTelemetry {
  std::uint64_t seed = 0;
  FailureCause failure = FailureCause::none;
  bool success = false;
  double peak_preload = 0.0;      // N, over grasping and retrieval
  double place_preload = 0.0;     // N, over the place rollout
  int regrasps = 0;
  bool shifted = false;
  bool slipped = false;
  double retrieval_contact_fraction = 0.0;
  double position_error = 0.0;    // m, released object vs goal
  double rotation_error = 0.0;    // rad
  std::size_t dense_length = 0;
  std::size_t sparse_length = 0;
};

/// Order-independent aggregate of episode telemetry.
struct Telemetry {
  std::uint64_t episodes = 0;
  std::uint64_t successes = 0;
  std::array<std::uint64_t, 4> failures{};  // indexed by FailureCause
  double max_peak_preload = 0.0;
  std::uint64_t regrasps = 0;
  std::uint64_t shifts = 0;
  std::uint64_t slips = 0;

  void add(const EpisodeTelemetry& e);
  void merge(const Telemetry& o);
  std::uint64_t failure_total() const { return episodes - successes; }
};

struct EpisodeResult {
  Episode episode;
  EpisodeTelemetry telemetry;
};

Pose sample_clearance(const Pose& base, double sigma_tr, Rng& rng);

/// Perturbs the leading ceil(fraction * n) waypoints of a place-ordered trajectory.
SparseTrajectory augment_waypoints(const SparseTrajectory& place_order, const CollectConfig& cc, Rng& rng);
std::size_t perturbed_count(std::size_t n, double fraction);

/// Corrective EE motion for a shallow grasp, or nothing when the grasp is stable.
std::optional<RelPose> tactile_regrasp(const WorldState& world, const TactilePatch& patch);

EpisodeResult run_pvp_episode(const SceneConfig& cfg, const CollectConfig& cc, std::uint64_t seed);

struct KinestheticConfig {
  double stretch_min = 0.95;  // time-scale range of the human demonstrator
  double stretch_max = 1.4;
  double jitter = 0.006;      // m, heading jitter on the free-space part
  double overshoot_prob = 0.35;
  double overshoot = 0.02;    // m
  std::array<double, 4> idle_segment_probs{0.1, 0.45, 0.3, 0.15};  // 0..3 idle segments
  int idle_min = 2;
  int idle_max = 6;
  int delay_min = 1;          // closed hold steps before opening
  int delay_max = 3;

  /// All human artifacts off: the generator reproduces the PvP place trajectory.
  static KinestheticConfig sanity();
};

EpisodeResult run_kinesthetic_episode(const SceneConfig& cfg, const CollectConfig& cc, std::uint64_t seed,
                                      const KinestheticConfig& kc = {});

/// World at the start of a stored episode's place rollout: fresh scene with the
/// target held at meta.place_start.
WorldState place_start_world(const SceneConfig& cfg, const EpisodeMeta& meta);

/// Open-loop execution of stored actions; returns the final world.
WorldState replay_actions(const SceneConfig& cfg, const Episode& e);

}  // namespace pvp
