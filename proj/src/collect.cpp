#include "pvp/collect.hpp"

#include <algorithm>
#include <cmath>

#include "collect_internal.hpp"
#include "pvp/errors.hpp"

namespace pvp {

const char* to_string(Source s) { return s == Source::pvp ? "pvp" : "kinesthetic"; }

void CollectConfig::validate() const {
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(noise_fraction >= 0.0 && noise_fraction <= 1.0)) throw ConfigError("noise fraction must lie in [0, 1]");
  if (n_open < 0) throw ConfigError("open-step count must be non-negative");
  if (!(sigma_tr >= 0.0)) throw ConfigError("clearance sigma must be non-negative");
  if (frame_stack < 1) throw ConfigError("frame stack depth must be at least 1");
  if (!(record_rate > 0.0) || !(v_lin > 0.0) || !(v_lift > 0.0) || !(v_ang > 0.0)) throw ConfigError("retrieval rates must be positive");
  if (approach_steps < 1 || regrasp_budget < 0) throw ConfigError("bad step budget");
  noise.validate();
}

std::vector<float> Episode::stack(std::size_t i, int depth) const {
  if (frames.empty()) throw DomainError("episode has no rendered frames");
  std::vector<float> out;
  out.reserve(static_cast<std::size_t>(depth) * ObservationFrame::kSize);
  for (int k = 0; k < depth; ++k) {
    const std::size_t j = i >= static_cast<std::size_t>(k) ? i - k : 0;
    const auto& f = frames.at(j);
    out.insert(out.end(), f.raster.begin(), f.raster.end());
    out.insert(out.end(), f.proprio.begin(), f.proprio.end());
  }
  return out;
}

void Telemetry::add(const EpisodeTelemetry& e) {
  ++episodes;
  if (e.success) ++successes;
  else ++failures[static_cast<int>(e.failure == FailureCause::none ? FailureCause::misplacement : e.failure)];
  max_peak_preload = std::max(max_peak_preload, e.peak_preload);
  regrasps += e.regrasps;
  shifts += e.shifted;
  slips += e.slipped;
}

void Telemetry::merge(const Telemetry& o) {
  episodes += o.episodes;
  successes += o.successes;
  for (std::size_t i = 0; i < failures.size(); ++i) failures[i] += o.failures[i];
  max_peak_preload = std::max(max_peak_preload, o.max_peak_preload);
  regrasps += o.regrasps;
  shifts += o.shifts;
  slips += o.slips;
}

Pose sample_clearance(const Pose& base, double sigma_tr, Rng& rng) {
  if (!(sigma_tr >= 0.0)) throw DomainError("clearance sigma must be non-negative");
  Pose out = base;
  for (int i = 0; i < 3; ++i) out.translation[i] += rng.normal(sigma_tr);
  return out;
}

std::size_t perturbed_count(std::size_t n, double fraction) {
  return std::min(n, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-12)));
}

SparseTrajectory augment_waypoints(const SparseTrajectory& place_order, const CollectConfig& cc, Rng& rng) {
  if (!cc.noise_aug) return place_order;
  SparseTrajectory out = place_order;
  const std::size_t k = perturbed_count(out.poses.size(), cc.noise_fraction);
  for (std::size_t i = 0; i < k; ++i) out.poses[i] = perturb_pose(out.poses[i], cc.noise, rng);
  return out;
}

std::optional<RelPose> tactile_regrasp(const WorldState& world, const TactilePatch& patch) {
  if (!world.attached || world.gripper != GripperState::closed) throw DomainError("regrasp needs a grasped object");
  if (patch.contact_fraction >= world.cfg().physics.f_stable) return std::nullopt;
  // Ideal centroid is the sensor center; a patch displaced toward the tip means
  // the object sits too shallow, so the EE moves deeper along its approach axis.
  RelPose r;
  r.translation = Vec3(0.0, 0.0, patch.centroid.x());
  return r;
}

namespace detail {

namespace {

// Interpolated free-space approach, one step per segment slice.
WorldState approach(WorldState w, const Pose& target, int steps, const StiffnessSetting& k) {
  const Pose start = w.ee_target;
  for (int i = 1; i <= steps; ++i) w = move_to(w, interpolate(start, target, static_cast<double>(i) / steps), k);
  return w;
}

void record_segment(WorldState& w, const Pose& to, double v_lin, const CollectConfig& cc, Rng& rng,
                    DenseTrajectory& dense, EpisodeTelemetry& tel) {
  const Pose from = w.ee_target;
  const double duration = std::max(translation_distance(from, to) / v_lin,
                                   rotation_distance(from.rotation, to.rotation) / cc.v_ang);
  const int ticks = std::max(1, static_cast<int>(std::ceil(duration * cc.record_rate - 1e-9)));
  for (int i = 1; i <= ticks; ++i) {
    const Pose target = i == ticks ? to : interpolate(from, to, static_cast<double>(i) / ticks);
    w = retrieve_tick(w, relative_action(w.ee_target, target), rng);
    tel.peak_preload = std::max(tel.peak_preload, w.preload);
    dense.entries.push_back({w.ee, static_cast<double>(dense.entries.size()) / cc.record_rate});
  }
}

}  // namespace

Retrieval grasp_and_retrieve(const SceneConfig& cfg, const CollectConfig& cc, std::uint64_t seed) {
  cc.validate();
  Retrieval r;
  Rng plan(derive_seed(seed, Stream::plan));
  Rng align(derive_seed(seed, Stream::align));
  Rng retrieve(derive_seed(seed, Stream::retrieve));
  Rng clear(derive_seed(seed, Stream::clearance));
  const auto& p = cfg.physics;

  r.meta.seed = seed;
  r.meta.scenario = cfg.scenario;
  r.meta.ccg = cc.ccg;
  r.meta.tr = cc.tr;
  r.meta.noise_aug = cc.noise_aug;
  r.telemetry.seed = seed;

  WorldState w = reset(cfg, seed, WorldMode::collection);
  const auto cands = prune_by_label(generate_candidates(w, cfg, plan), LabelQuery{cfg.query});
  GraspCandidate g = select_grasp(cands, plan);
  r.meta.target = g.object;

  // Residual misalignment along the closing axis that a stiff grasp turns into preload.
  const double e = std::clamp(align.normal(p.align_sigma), -3.0 * p.align_sigma, 3.0 * p.align_sigma);
  const Pose grasp_ee = compose(g.ee_pose(), Pose::from_translation(Vec3(e, 0.0, 0.0)));
  const Pose pre = pregrasp_of(grasp_ee, cfg.pregrasp_offset, cfg.up);
  const StiffnessSetting stiff = StiffnessSetting::stiff(p);
  const StiffnessSetting k_close = cc.ccg ? StiffnessSetting::compliant_full(p) : stiff;

  w = approach(w, pre, cc.approach_steps, stiff);
  w = approach(w, grasp_ee, cc.approach_steps, stiff);
  w = close_gripper(w, k_close, g);
  r.telemetry.peak_preload = w.preload;
  if (w.failure != FailureCause::none) {
    r.failed = true;
    r.meta.failure = r.telemetry.failure = w.failure;
    r.world = std::move(w);
    return r;
  }

  while (cc.tr) {
    const auto fix = tactile_regrasp(w, read_tactile(w));
    if (!fix) break;
    if (r.meta.regrasp_count >= cc.regrasp_budget) {
      r.failed = true;
      r.meta.failure = r.telemetry.failure = FailureCause::unstable_grasp;
      r.world = std::move(w);
      return r;
    }
    const double delta = std::min(fix->translation.z(), p.finger_depth - g.depth);
    w = open_gripper(w);
    w = move_to(w, compose(w.ee_target, Pose::from_translation(Vec3(0.0, 0.0, delta))), k_close);
    g.depth += delta;
    g.local_tcp = compose(g.local_tcp, Pose::from_translation(Vec3(0.0, 0.0, delta)));
    w = close_gripper(w, k_close, g);
    r.telemetry.peak_preload = std::max(r.telemetry.peak_preload, w.preload);
    ++r.meta.regrasp_count;
    if (w.failure != FailureCause::none) {
      r.failed = true;
      r.meta.failure = r.telemetry.failure = w.failure;
      r.world = std::move(w);
      return r;
    }
  }
  r.telemetry.regrasps = r.meta.regrasp_count;
  r.telemetry.retrieval_contact_fraction = read_tactile(w).contact_fraction;

  // Retrieval: rotationally compliant, straight up to the pregrasp height, then to a sampled clearance pose.
  w.stiffness = StiffnessSetting::compliant_rotational(p);
  const Pose clearance = sample_clearance(cfg.clearance_pose, cc.sigma_tr, clear);
  DenseTrajectory dense;
  dense.rate_hz = cc.record_rate;
  dense.entries.push_back({w.ee, 0.0});
  record_segment(w, pregrasp_of(w.ee, cfg.pregrasp_offset, cfg.up), cc.v_lift, cc, retrieve, dense, r.telemetry);
  record_segment(w, clearance, cc.v_lin, cc, retrieve, dense, r.telemetry);
  r.telemetry.shifted = w.shifted;
  r.telemetry.slipped = w.slipped;
  r.telemetry.dense_length = dense.entries.size();
  r.sparse = downsample(dense, cc.dt);
  r.telemetry.sparse_length = r.sparse.poses.size();
  r.world = std::move(w);
  return r;
}

EpisodeResult place_rollout(Retrieval r, const std::vector<Pose>& waypoints, const CollectConfig& cc) {
  EpisodeResult out;
  out.episode.meta = r.meta;
  out.telemetry = r.telemetry;
  WorldState w = std::move(r.world);
  const StiffnessSetting k = StiffnessSetting::compliant_rotational(w.cfg().physics);
  w = move_to(w, waypoints.front(), k);
  w.preload = 0.0;
  out.episode.meta.place_start = w.ee_target;
  out.episode.meta.grasp_offset = w.grasp_offset;
  out.episode.actions = actions_from_waypoints(waypoints, cc.n_open);
  if (cc.render) out.episode.frames.push_back(render_observation(w));
  for (const auto& a : out.episode.actions) {
    w = step(w, a.rel(), a.gripper, k);
    out.telemetry.place_preload = std::max(out.telemetry.place_preload, w.preload);
    if (cc.render) out.episode.frames.push_back(render_observation(w));
  }
  const int t = out.episode.meta.target;
  const Pose& goal = w.cfg().objects[t].goal;
  out.telemetry.position_error = translation_distance(w.objects[t], goal);
  out.telemetry.rotation_error = placement_rotation_error(w.cfg().objects[t], w.objects[t].rotation, goal.rotation);
  const bool ok = check_success(w, t);
  out.episode.meta.success = out.telemetry.success = ok;
  out.episode.meta.failure = out.telemetry.failure = ok ? FailureCause::none : FailureCause::misplacement;
  return out;
}

}  // namespace detail

EpisodeResult run_pvp_episode(const SceneConfig& cfg, const CollectConfig& cc, std::uint64_t seed) {
  detail::Retrieval r = detail::grasp_and_retrieve(cfg, cc, seed);
  if (r.failed) {
    EpisodeResult out;
    out.episode.meta = r.meta;
    out.telemetry = r.telemetry;
    return out;
  }
  r.meta.source = Source::pvp;
  Rng noise(derive_seed(seed, detail::Stream::noise));
  const SparseTrajectory place = augment_waypoints(reversed(r.sparse), cc, noise);
  return detail::place_rollout(std::move(r), place.poses, cc);
}

WorldState place_start_world(const SceneConfig& cfg, const EpisodeMeta& meta) {
  WorldState w = reset(cfg, meta.seed, WorldMode::collection);
  const int t = meta.target;
  if (t < 0 || t >= static_cast<int>(w.objects.size())) throw DomainError("episode target out of range");
  w.ee = w.ee_target = meta.place_start;
  w.gripper = GripperState::closed;
  w.attached = t;
  w.target = t;
  w.grasp_offset = meta.grasp_offset;
  w.grasp_depth = cfg.physics.finger_depth;
  w.objects[t] = compose(w.ee, w.grasp_offset);
  w.held_engaged = in_environment_contact(cfg, t, w.objects[t]);
  w.stiffness = StiffnessSetting::compliant_rotational(cfg.physics);
  return w;
}

WorldState replay_actions(const SceneConfig& cfg, const Episode& e) {
  WorldState w = place_start_world(cfg, e.meta);
  const StiffnessSetting k = StiffnessSetting::compliant_rotational(cfg.physics);
  for (const auto& a : e.actions) w = step(w, a.rel(), a.gripper, k);
  return w;
}

}  // namespace pvp
