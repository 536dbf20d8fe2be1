#include "pvp/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <mutex>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "pvp/dataset.hpp"
#include "pvp/errors.hpp"

namespace pvp {

using nlohmann::json;

PolicyFn policy_fn(const PolicyParams& p, bool low_noise) {
  return [&p, low_noise](std::span<const float> stack, const WorldState&, Rng& rng) {
    return act(p, stack, low_noise, rng);
  };
}

RolloutResult rollout(const PolicyFn& policy, WorldState w, std::uint64_t seed, int max_steps, int frame_stack) {
  Rng rng(derive_seed(seed, 0xe7a1));
  const StiffnessSetting k = StiffnessSetting::compliant_rotational(w.cfg().physics);
  std::deque<ObservationFrame> frames;
  frames.push_back(render_observation(w));
  std::vector<float> stack;
  RolloutResult r;
  for (int t = 0; t < max_steps; ++t) {
    stack.clear();
    for (int i = 0; i < frame_stack; ++i) {
      const auto& f = frames[frames.size() > static_cast<std::size_t>(i) ? frames.size() - 1 - i : 0];
      stack.insert(stack.end(), f.raster.begin(), f.raster.end());
      stack.insert(stack.end(), f.proprio.begin(), f.proprio.end());
    }
    const Action a = policy(stack, w, rng);
    w = step(w, a.rel(), a.gripper, k);
    ++r.steps;
    if (w.gripper == GripperState::open) {
      r.released = true;
      break;
    }
    frames.push_back(render_observation(w));
    if (frames.size() > static_cast<std::size_t>(frame_stack)) frames.pop_front();
  }
  const int target = w.target;
  if (target >= 0) {
    const Pose& goal = w.cfg().objects[target].goal;
    r.position_error = translation_distance(w.objects[target], goal);
    r.rotation_error = placement_rotation_error(w.cfg().objects[target], w.objects[target].rotation, goal.rotation);
    r.settled = w.gripper == GripperState::open && w.attached != target && w.stable[target];
    r.success = check_success(w, target);
  }
  return r;
}

RolloutResult rollout(const PolicyParams& p, const SceneConfig& cfg, std::uint64_t seed, int max_steps) {
  return rollout(policy_fn(p, true), reset(cfg, seed, WorldMode::evaluation), seed, max_steps, p.frame_stack);
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex m;
  std::vector<std::thread> pool;
  const int workers = static_cast<int>(std::min<std::size_t>(n, static_cast<std::size_t>(jobs)));
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(m);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::uint64_t episode_seed(std::uint64_t batch_seed, std::size_t index) { return derive_seed(batch_seed, index); }

std::vector<EpisodeResult> collect_batch(const SceneConfig& cfg, const CollectConfig& cc, Source source,
                                         std::uint64_t batch_seed, std::size_t episodes, int jobs) {
  std::vector<EpisodeResult> out(episodes);
  parallel_for(episodes, jobs, [&](std::size_t i) {
    const std::uint64_t s = episode_seed(batch_seed, i);
    try {
      out[i] = source == Source::pvp ? run_pvp_episode(cfg, cc, s) : run_kinesthetic_episode(cfg, cc, s);
    } catch (const NoGraspError&) {
      out[i].episode.meta.seed = out[i].telemetry.seed = s;
      out[i].episode.meta.source = source;
      out[i].episode.meta.failure = out[i].telemetry.failure = FailureCause::grasp_miss;
    }
  });
  return out;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double m = 0.0;
  for (double x : v) m += x;
  m /= v.size();
  double sq = 0.0;
  for (double x : v) sq += (x - m) * (x - m);
  return {m, v.size() > 1 ? std::sqrt(sq / (v.size() - 1)) : 0.0};
}

std::vector<Episode> episodes_of(std::vector<EpisodeResult>&& rs) {
  std::vector<Episode> out;
  out.reserve(rs.size());
  for (auto& r : rs) out.push_back(std::move(r.episode));
  return out;
}

// Appends one seed's outcomes, at the nominal and the scaled tolerances.
void evaluate_into(CellResult& c, const PolicyParams& p, const SceneConfig& cfg, std::uint64_t eval_seed, int n,
                   int jobs) {
  std::vector<RolloutResult> rs(n);
  parallel_for(n, jobs, [&](std::size_t i) { rs[i] = rollout(p, cfg, episode_seed(eval_seed, i)); });
  std::vector<std::uint8_t> bits;
  std::array<std::vector<std::uint8_t>, 2> scaled;
  for (const auto& r : rs) {
    bits.push_back(r.success);
    for (int k = 0; k < 2; ++k) scaled[k].push_back(r.success_at(kToleranceScales[k], cfg.physics));
  }
  c.outcomes.push_back(std::move(bits));
  for (int k = 0; k < 2; ++k) c.scaled_outcomes[k].push_back(std::move(scaled[k]));
}

double percent(const std::vector<std::vector<std::uint8_t>>& outcomes) {
  std::uint64_t k = 0, n = 0;
  for (const auto& o : outcomes) {
    for (auto b : o) k += b;
    n += o.size();
  }
  return n ? 100.0 * static_cast<double>(k) / n : 0.0;
}

}  // namespace

void finalize(CellResult& c) {
  c.rates.clear();
  c.successes = c.rollouts = 0;
  for (const auto& o : c.outcomes) {
    std::uint64_t k = 0;
    for (auto b : o) k += b;
    c.successes += k;
    c.rollouts += o.size();
    c.rates.push_back(o.empty() ? 0.0 : 100.0 * static_cast<double>(k) / o.size());
  }
  std::tie(c.mean, c.std) = mean_std(c.rates);
  for (int k = 0; k < 2; ++k) c.scaled_mean[k] = percent(c.scaled_outcomes[k]);
}

RobustnessReport ablate_robustness(const SceneConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                   std::size_t episodes, int jobs, const CollectConfig& base) {
  if (seeds.empty()) throw ConfigError("robustness ablation needs at least one seed");
  const auto t0 = std::chrono::steady_clock::now();
  RobustnessReport rep;
  rep.seeds = seeds;
  rep.episodes = episodes;
  rep.scene_hash = scene_hash(cfg);
  const char* names[3] = {"naive", "ccg", "ccg+tr"};
  for (int c = 0; c < 3; ++c) {
    CollectConfig cc = base;
    cc.render = false;
    cc.noise_aug = false;
    cc.ccg = c >= 1;
    cc.tr = c >= 2;
    ConditionResult& cr = rep.conditions[c];
    cr.name = names[c];
    std::vector<double> counts;
    for (std::uint64_t s : seeds) {
      const auto rs = collect_batch(cfg, cc, Source::pvp, s, episodes, jobs);
      Telemetry t;
      std::vector<std::uint8_t> bits;
      std::array<std::uint64_t, 2> scaled{};
      for (const auto& r : rs) {
        t.add(r.telemetry);
        bits.push_back(r.telemetry.success);
        const auto& e = r.telemetry;
        const bool placed = e.failure == FailureCause::none || e.failure == FailureCause::misplacement;
        for (int k = 0; k < 2; ++k) {
          const double f = kToleranceScales[k];
          scaled[k] += !(placed && e.position_error <= f * cfg.physics.eps_pos &&
                         e.rotation_error <= f * cfg.physics.eps_rot);
        }
      }
      for (int k = 0; k < 2; ++k) cr.scaled_failures[k].push_back(scaled[k]);
      cr.failures.push_back(t.failure_total());
      cr.causes.push_back(t.failures);
      cr.outcomes.push_back(std::move(bits));
      counts.push_back(static_cast<double>(t.failure_total()));
    }
    std::tie(cr.mean, cr.std) = mean_std(counts);
  }
  rep.runtime_s = seconds_since(t0);
  return rep;
}

NoiseAblationConfig::NoiseAblationConfig() {
  det.modes = 1;
  det.fixed_variance = true;
  gmm.modes = 5;
  gmm.fixed_variance = false;
}

NoiseReport ablate_noise(const SceneConfig& cfg, const std::vector<std::uint64_t>& seeds,
                         const NoiseAblationConfig& nc, int jobs) {
  if (seeds.empty()) throw ConfigError("noise ablation needs at least one seed");
  const auto t0 = std::chrono::steady_clock::now();
  NoiseReport rep;
  rep.seeds = seeds;
  rep.config = nc;
  rep.scene_hash = scene_hash(cfg);
  const char* names[4] = {"det", "det+noise", "gmm", "gmm+noise"};
  for (int c = 0; c < 4; ++c) rep.cells[c].name = names[c];
  for (std::uint64_t s : seeds) {
    std::array<std::vector<Episode>, 2> data;
    for (int noise = 0; noise < 2; ++noise) {
      CollectConfig cc;
      cc.noise_aug = noise == 1;
      // Both datasets share episode seeds, so they differ only by the augmentation.
      data[noise] = episodes_of(collect_batch(cfg, cc, Source::pvp, derive_seed(s, 0xda7a), nc.episodes, jobs));
    }
    std::array<PolicyParams, 4> policies;
    parallel_for(4, jobs, [&](std::size_t c) {
      TrainConfig tc = c < 2 ? nc.det : nc.gmm;
      tc.seed = derive_seed(s, 0x7a17);
      policies[c] = train(data[c % 2], tc).params;
    });
    const std::uint64_t eval_seed = derive_seed(s, 0xe7a1);
    for (int c = 0; c < 4; ++c) evaluate_into(rep.cells[c], policies[c], cfg, eval_seed, nc.rollouts, jobs);
  }
  for (auto& c : rep.cells) finalize(c);
  rep.runtime_s = seconds_since(t0);
  return rep;
}

KinestheticCompareConfig::KinestheticCompareConfig() {
  train.modes = 5;
  train.min_steps = 1500;
}

CompareReport compare_kinesthetic(const SceneConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                  const KinestheticCompareConfig& kc, int jobs) {
  if (seeds.empty()) throw ConfigError("kinesthetic comparison needs at least one seed");
  if (kc.sizes.empty()) throw ConfigError("no dataset sizes given");
  const auto t0 = std::chrono::steady_clock::now();
  CompareReport rep;
  rep.seeds = seeds;
  rep.config = kc;
  rep.scene_hash = scene_hash(cfg);
  const std::size_t largest = *std::max_element(kc.sizes.begin(), kc.sizes.end());
  for (std::size_t n : kc.sizes) {
    ComparePoint pt;
    pt.size = n;
    pt.pvp.name = "pvp";
    pt.kinesthetic.name = "kinesthetic";
    rep.points.push_back(pt);
  }
  std::vector<double> pvp_len, kin_len;
  for (std::uint64_t s : seeds) {
    CollectConfig cc;
    cc.noise_aug = kc.pvp_noise;
    // Paired datasets: the same episode seeds give the same scenes and clearance samples.
    const std::uint64_t data_seed = derive_seed(s, 0xc0de);
    auto pvp = episodes_of(collect_batch(cfg, cc, Source::pvp, data_seed, largest, jobs));
    CollectConfig kcfg;
    auto kin = episodes_of(collect_batch(cfg, kcfg, Source::kinesthetic, data_seed, largest, jobs));
    if (s == seeds.front()) {
      for (const auto& e : pvp) pvp_len.push_back(static_cast<double>(e.length()));
      for (const auto& e : kin) kin_len.push_back(static_cast<double>(e.length()));
    }
    const std::uint64_t eval_seed = derive_seed(s, 0xe7a1);
    std::vector<PolicyParams> policies(rep.points.size() * 2);
    parallel_for(policies.size(), jobs, [&](std::size_t i) {
      const std::size_t n = rep.points[i / 2].size;
      const auto& src = i % 2 == 0 ? pvp : kin;
      const std::vector<Episode> subset(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(n));
      TrainConfig tc = kc.train;
      tc.seed = derive_seed(s, 0x7a17 + n);
      policies[i] = train(subset, tc).params;
    });
    for (std::size_t p = 0; p < rep.points.size(); ++p) {
      evaluate_into(rep.points[p].pvp, policies[2 * p], cfg, eval_seed, kc.rollouts, jobs);
      evaluate_into(rep.points[p].kinesthetic, policies[2 * p + 1], cfg, eval_seed, kc.rollouts, jobs);
    }
  }
  for (auto& pt : rep.points) {
    finalize(pt.pvp);
    finalize(pt.kinesthetic);
  }
  const auto ps = length_stats(pvp_len), ks = length_stats(kin_len);
  rep.pvp_length = {ps.mean, ps.std};
  rep.kinesthetic_length = {ks.mean, ks.std};
  rep.runtime_s = seconds_since(t0);
  return rep;
}

namespace {

json cell_json(const CellResult& c) {
  json o;
  o["name"] = c.name;
  o["successes"] = c.successes;
  o["rollouts"] = c.rollouts;
  o["rate_per_seed"] = c.rates;
  o["mean"] = c.mean;
  o["std"] = c.std;
  o["outcomes"] = c.outcomes;
  o["success_at_half_tolerance"] = c.scaled_mean[0];
  o["success_at_1_5x_tolerance"] = c.scaled_mean[1];
  return o;
}

json train_json(const TrainConfig& t) {
  return {{"batch", t.batch},         {"epochs", t.epochs},       {"min_steps", t.min_steps},
          {"step_size", t.step_size}, {"momentum", t.momentum},   {"clip_norm", t.clip_norm}, {"modes", t.modes},
          {"fixed_variance", t.fixed_variance}, {"sigma_eval", t.sigma_eval}, {"hidden", t.hidden},
          {"holdout", t.holdout},     {"frame_stack", t.frame_stack}};
}

std::string finish(json& j, double runtime, bool timestamps) {
  if (timestamps) j["runtime_s"] = runtime;
  return j.dump(2) + "\n";
}

}  // namespace

std::string to_json(const RobustnessReport& r, bool timestamps) {
  json j;
  j["experiment"] = "robustness";
  j["seeds"] = r.seeds;
  j["episodes_per_seed"] = r.episodes;
  j["scene_hash"] = r.scene_hash;
  json conds = json::array();
  for (const auto& c : r.conditions) {
    json o;
    o["name"] = c.name;
    o["failures_per_seed"] = c.failures;
    json causes = json::array();
    for (const auto& h : c.causes) {
      causes.push_back({{"grasp_miss", h[1]}, {"unstable_grasp", h[2]}, {"misplacement", h[3]}});
    }
    o["failure_causes_per_seed"] = causes;
    o["mean"] = c.mean;
    o["std"] = c.std;
    o["failures_at_half_tolerance"] = c.scaled_failures[0];
    o["failures_at_1_5x_tolerance"] = c.scaled_failures[1];
    conds.push_back(o);
  }
  j["conditions"] = conds;
  return finish(j, r.runtime_s, timestamps);
}

std::string to_json(const NoiseReport& r, bool timestamps) {
  json j;
  j["experiment"] = "noise_ablation";
  j["seeds"] = r.seeds;
  j["episodes_per_dataset"] = r.config.episodes;
  j["rollouts_per_seed"] = r.config.rollouts;
  j["train_det"] = train_json(r.config.det);
  j["train_gmm"] = train_json(r.config.gmm);
  j["scene_hash"] = r.scene_hash;
  json cells = json::array();
  for (const auto& c : r.cells) cells.push_back(cell_json(c));
  j["cells"] = cells;
  return finish(j, r.runtime_s, timestamps);
}

std::string to_json(const CompareReport& r, bool timestamps) {
  json j;
  j["experiment"] = "kinesthetic_comparison";
  j["seeds"] = r.seeds;
  j["sizes"] = r.config.sizes;
  j["rollouts_per_seed"] = r.config.rollouts;
  j["pvp_noise_aug"] = r.config.pvp_noise;
  j["train"] = train_json(r.config.train);
  j["scene_hash"] = r.scene_hash;
  j["pvp_length"] = {{"mean", r.pvp_length[0]}, {"std", r.pvp_length[1]}};
  j["kinesthetic_length"] = {{"mean", r.kinesthetic_length[0]}, {"std", r.kinesthetic_length[1]}};
  json pts = json::array();
  for (const auto& p : r.points) pts.push_back({{"size", p.size}, {"pvp", cell_json(p.pvp)}, {"kinesthetic", cell_json(p.kinesthetic)}});
  j["points"] = pts;
  return finish(j, r.runtime_s, timestamps);
}

std::string robustness_csv(const RobustnessReport& r) {
  std::string out = "condition,seed,failures,grasp_miss,unstable_grasp,misplacement\n";
  for (const auto& c : r.conditions) {
    for (std::size_t i = 0; i < c.failures.size(); ++i) {
      out += c.name + "," + std::to_string(r.seeds[i]) + "," + std::to_string(c.failures[i]) + "," +
             std::to_string(c.causes[i][1]) + "," + std::to_string(c.causes[i][2]) + "," +
             std::to_string(c.causes[i][3]) + "\n";
    }
  }
  return out;
}

std::string noise_csv(const NoiseReport& r) {
  std::string out = "cell,head,noise_aug,mean_success,std_success,successes,rollouts\n";
  char buf[160];
  for (std::size_t i = 0; i < r.cells.size(); ++i) {
    const auto& c = r.cells[i];
    std::snprintf(buf, sizeof buf, "%s,%s,%d,%.4f,%.4f,%llu,%llu\n", c.name.c_str(), i < 2 ? "det" : "gmm",
                  static_cast<int>(i % 2), c.mean, c.std, static_cast<unsigned long long>(c.successes),
                  static_cast<unsigned long long>(c.rollouts));
    out += buf;
  }
  return out;
}

std::string compare_csv(const CompareReport& r) {
  std::string out = "size,pvp_mean,pvp_std,kinesthetic_mean,kinesthetic_std\n";
  char buf[160];
  for (const auto& p : r.points) {
    std::snprintf(buf, sizeof buf, "%zu,%.4f,%.4f,%.4f,%.4f\n", p.size, p.pvp.mean, p.pvp.std, p.kinesthetic.mean,
                  p.kinesthetic.std);
    out += buf;
  }
  return out;
}

}  // namespace pvp
