#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pvp/dataset.hpp"
#include "pvp/errors.hpp"
#include "pvp/eval.hpp"
#include "pvp/grasp.hpp"
#include "pvp/policy.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pvp;

namespace {

constexpr const char* kOutputRootEnv = "PVP_OUTPUT_ROOT";

// Relative output paths land under $PVP_OUTPUT_ROOT when it is set.
std::string output_path(const std::string& p) {
  const char* root = std::getenv(kOutputRootEnv);
  if (!root || !*root || fs::path(p).is_absolute()) return p;
  return (fs::path(root) / p).string();
}

void write_text(const std::string& path, const std::string& text) {
  const fs::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing", 0);
  out << text;
  if (!out.flush()) throw IoError("write failed for " + path, 0);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path, 0);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SceneConfig scene_for(const std::string& scene, const std::string& query) {
  SceneConfig cfg = load_scene(scene);
  if (!query.empty()) cfg.query = LabelQuery::parse(query).labels;
  cfg.validate();
  return cfg;
}

Source parse_source(const std::string& s) {
  if (s == "pvp") return Source::pvp;
  if (s == "kinesthetic") return Source::kinesthetic;
  throw ConfigError("unknown source '" + s + "'");
}

json telemetry_json(const std::vector<EpisodeResult>& rs) {
  Telemetry t;
  json eps = json::array();
  for (const auto& r : rs) {
    const auto& e = r.telemetry;
    t.add(e);
    eps.push_back({{"seed", e.seed},
                   {"success", e.success},
                   {"failure", to_string(e.failure)},
                   {"regrasps", e.regrasps},
                   {"peak_preload", e.peak_preload},
                   {"place_preload", e.place_preload},
                   {"shifted", e.shifted},
                   {"slipped", e.slipped},
                   {"position_error", e.position_error},
                   {"rotation_error", e.rotation_error},
                   {"dense_length", e.dense_length},
                   {"sparse_length", e.sparse_length}});
  }
  json j;
  j["episodes"] = t.episodes;
  j["successes"] = t.successes;
  j["failures"] = t.failure_total();
  j["failure_causes"] = {{"grasp_miss", t.failures[1]}, {"unstable_grasp", t.failures[2]},
                         {"misplacement", t.failures[3]}};
  j["max_peak_preload"] = t.max_peak_preload;
  j["regrasps"] = t.regrasps;
  j["shifts"] = t.shifts;
  j["slips"] = t.slips;
  j["per_episode"] = eps;
  return j;
}

json train_config_json(const TrainConfig& t) {
  return {{"batch", t.batch},         {"epochs", t.epochs},         {"min_steps", t.min_steps},
          {"step_size", t.step_size}, {"momentum", t.momentum},     {"clip_norm", t.clip_norm}, {"seed", t.seed},
          {"modes", t.modes},         {"fixed_variance", t.fixed_variance}, {"sigma_eval", t.sigma_eval},
          {"hidden", t.hidden},       {"holdout", t.holdout},       {"frame_stack", t.frame_stack}};
}

std::vector<std::uint64_t> require_seeds(const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw ConfigError("--seeds is required");
  return seeds;
}

struct Common {
  std::string scene = "dishrack";
  std::string query;
  std::string out;
  int jobs = 1;
  bool no_timestamps = false;
};

void add_common(CLI::App* c, Common& o, bool with_scene = true) {
  if (with_scene) {
    c->add_option("--scene", o.scene, "Built-in scene name (dishrack, table) or JSON scene file")->capture_default_str();
    c->add_option("--query", o.query, "Comma-separated object labels to act on (overrides the scene query)");
  }
  c->add_option("--jobs", o.jobs, "Concurrent worlds; results do not depend on it")
      ->capture_default_str()
      ->check(CLI::Range(1, 1024));
  c->add_flag("--no-timestamps", o.no_timestamps, "Omit wall-clock fields so reruns are byte-identical");
}

int run(int argc, char** argv) {
  CLI::App app{"Pick-and-place demonstration collection, training and evaluation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with flag values; explicit flags take precedence");
  app.footer(std::string("Relative --out paths are resolved under $") + kOutputRootEnv + " when it is set.");

  // collect
  Common cc_common;
  std::size_t episodes = 128;
  std::uint64_t seed = 0;
  bool ccg = false, tr = false, noise_aug = false;
  std::string source = "pvp";
  auto* collect = app.add_subcommand("collect", "Collect place demonstrations into a dataset directory");
  add_common(collect, cc_common);
  collect->add_option("--episodes", episodes, "Number of episodes (>= 1)")->capture_default_str();
  collect->add_option("--source", source, "Demonstration source")
      ->check(CLI::IsMember({"pvp", "kinesthetic"}))
      ->capture_default_str();
  collect->add_flag("--ccg", ccg, "Compliant control during grasping");
  collect->add_flag("--tr", tr, "Tactile regrasping");
  collect->add_flag("--noise-aug", noise_aug, "Waypoint noise augmentation");
  collect->add_option("--seed", seed, "Batch seed")->required();
  collect->add_option("--out", cc_common.out, "Output dataset directory")->required();

  // train
  Common tr_common;
  std::string data;
  TrainConfig tcfg;
  bool det = false;
  auto* train_cmd = app.add_subcommand("train", "Train a policy on a dataset directory");
  add_common(train_cmd, tr_common, false);
  train_cmd->add_option("--data", data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--out", tr_common.out, "Output parameter file")->required();
  train_cmd->add_option("--seed", tcfg.seed, "Training seed")->required();
  train_cmd->add_option("--modes", tcfg.modes, "Mixture modes")->capture_default_str();
  train_cmd->add_flag("--det", det, "Deterministic head: one fixed-variance mode (mean-squared-error equivalent)");
  train_cmd->add_option("--epochs", tcfg.epochs, "Training epochs")->capture_default_str();
  train_cmd->add_option("--min-steps", tcfg.min_steps, "Minimum gradient steps (raises epochs)")->capture_default_str();
  train_cmd->add_option("--batch", tcfg.batch, "Batch size")->capture_default_str();
  train_cmd->add_option("--lr", tcfg.step_size, "Step size")->capture_default_str();
  train_cmd->add_option("--momentum", tcfg.momentum, "Momentum")->capture_default_str();
  train_cmd->add_option("--clip-norm", tcfg.clip_norm, "Global gradient-norm clip, 0 disables")->capture_default_str();
  train_cmd->add_option("--hidden", tcfg.hidden, "Hidden width")->capture_default_str();
  train_cmd->add_option("--sigma-eval", tcfg.sigma_eval, "Low-noise sampling std")->capture_default_str();

  // eval
  Common ev_common;
  std::string params_path;
  int rollouts = 20;
  std::uint64_t eval_seed = 0;
  auto* eval_cmd = app.add_subcommand("eval", "Closed-loop rollouts of a trained policy");
  add_common(eval_cmd, ev_common);
  eval_cmd->add_option("--params", params_path, "Parameter file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--rollouts", rollouts, "Rollouts")->capture_default_str()->check(CLI::PositiveNumber);
  eval_cmd->add_option("--seed", eval_seed, "Evaluation seed")->required();
  eval_cmd->add_option("--out", ev_common.out, "Report JSON path")->required();

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Reproduce an ablation table");
  ablate->require_subcommand(1);
  Common ab_common;
  std::vector<std::uint64_t> seeds;
  std::size_t ab_episodes = 128;
  int ab_rollouts = 20;
  std::vector<std::size_t> sizes{16, 32, 64, 128};
  auto add_ablate = [&](const char* name, const char* help) {
    auto* c = ablate->add_subcommand(name, help);
    add_common(c, ab_common);
    c->add_option("--seeds", seeds, "Seeds, one repetition each (required)")->required()->delimiter(',');
    c->add_option("--out", ab_common.out, "Output directory for the JSON and CSV reports")->required();
    return c;
  };
  auto* robust = add_ablate("robustness", "Failure counts for naive, CCG and CCG+TR collection");
  robust->add_option("--episodes", ab_episodes, "Episodes per seed and condition")->capture_default_str();
  auto* noise = add_ablate("noise", "Deterministic vs mixture head, with and without noise augmentation");
  noise->add_option("--episodes", ab_episodes, "Episodes per training set")->capture_default_str();
  noise->add_option("--rollouts", ab_rollouts, "Rollouts per cell and seed")->capture_default_str();
  auto* kin = add_ablate("kinesthetic", "PvP vs kinesthetic demonstrations over dataset sizes");
  KinestheticCompareConfig kcfg;
  kin->add_option("--sizes", sizes, "Dataset sizes")->delimiter(',')->capture_default_str();
  kin->add_option("--rollouts", kcfg.rollouts, "Rollouts per size, source and seed")->capture_default_str();

  // stats
  std::string stats_data, stats_out;
  auto* stats = app.add_subcommand("stats", "Episode length statistics of a dataset");
  stats->add_option("--data", stats_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  stats->add_option("--out", stats_out, "Optional JSON output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (collect->parsed()) {
    if (episodes == 0) throw ConfigError("--episodes must be at least 1");
    const SceneConfig cfg = scene_for(cc_common.scene, cc_common.query);
    CollectConfig c;
    c.ccg = ccg;
    c.tr = tr;
    c.noise_aug = noise_aug;
    c.validate();
    const Source src = parse_source(source);
    const auto rs = collect_batch(cfg, c, src, seed, episodes, cc_common.jobs);
    const std::string dir = output_path(cc_common.out);
    DatasetWriter w(dir, cfg);
    std::size_t written = 0;
    for (const auto& r : rs) {
      if (r.episode.actions.empty()) continue;  // no place rollout; kept in telemetry only
      w.append(r.episode);
      ++written;
    }
    const std::string manifest = w.finish();
    json tj = telemetry_json(rs);
    tj["config"] = {{"scene", cc_common.scene}, {"scene_hash", scene_hash(cfg)}, {"query", cfg.query},
                    {"source", source},         {"episodes", episodes},          {"seed", seed},
                    {"ccg", ccg},               {"tr", tr},                      {"noise_aug", noise_aug}};
    const std::string tpath = (fs::path(dir) / "telemetry.json").string();
    write_text(tpath, tj.dump(2) + "\n");
    std::cout << manifest << "\n" << (fs::path(dir) / "episodes.bin").string() << "\n" << tpath << "\n";
    std::cout << "collected " << rs.size() << " episodes (" << written << " stored), " << tj["successes"]
              << " successes, " << tj["failures"] << " failures\n";
    return 0;
  }

  if (train_cmd->parsed()) {
    if (det) {
      tcfg.modes = 1;
      tcfg.fixed_variance = true;
    }
    tcfg.validate();
    const auto eps = read_dataset(data);
    const TrainResult r = train(eps, tcfg);
    const std::string out = output_path(tr_common.out);
    const fs::path op(out);
    std::error_code ec;
    if (op.has_parent_path()) fs::create_directories(op.parent_path(), ec);
    save_params(out, r.params);
    const std::string log_path = out + ".log.csv";
    write_text(log_path, epoch_log_csv(r.log));
    json j;
    j["config"] = train_config_json(tcfg);
    j["data"] = data;
    j["train_samples"] = r.train_samples;
    j["heldout_samples"] = r.heldout_samples;
    j["steps"] = r.steps;
    j["final_train_loss"] = r.log.back().train_loss;
    j["final_heldout_loss"] = r.log.back().heldout_loss;
    const std::string summary = out + ".json";
    write_text(summary, j.dump(2) + "\n");
    std::cout << out << "\n" << log_path << "\n" << summary << "\n";
    std::printf("trained %d-mode policy on %zu samples, %zu steps, held-out loss %.4f -> %.4f\n", tcfg.modes,
                r.train_samples, r.steps, r.log.front().heldout_loss, r.log.back().heldout_loss);
    return 0;
  }

  if (eval_cmd->parsed()) {
    const SceneConfig cfg = scene_for(ev_common.scene, ev_common.query);
    const PolicyParams p = load_params(params_path);
    std::vector<RolloutResult> rs(rollouts);
    parallel_for(rs.size(), ev_common.jobs,
                 [&](std::size_t i) { rs[i] = rollout(p, cfg, episode_seed(eval_seed, i)); });
    CellResult cell;
    cell.name = "policy";
    std::vector<std::uint8_t> bits;
    json per = json::array();
    for (std::size_t i = 0; i < rs.size(); ++i) {
      bits.push_back(rs[i].success);
      per.push_back({{"seed", episode_seed(eval_seed, i)}, {"success", rs[i].success}, {"released", rs[i].released},
                     {"steps", rs[i].steps}, {"position_error", rs[i].position_error},
                     {"rotation_error", rs[i].rotation_error}});
    }
    cell.outcomes.push_back(bits);
    finalize(cell);
    json j;
    j["config"] = {{"scene", ev_common.scene}, {"scene_hash", scene_hash(cfg)}, {"params", params_path},
                   {"rollouts", rollouts},     {"seed", eval_seed},             {"max_steps", kMaxRolloutSteps}};
    j["successes"] = cell.successes;
    j["rollouts"] = cell.rollouts;
    j["success_rate"] = cell.mean;
    j["rollout_results"] = per;
    const std::string out = output_path(ev_common.out);
    write_text(out, j.dump(2) + "\n");
    std::cout << out << "\n";
    std::printf("success %llu/%llu (%.1f%%)\n", static_cast<unsigned long long>(cell.successes),
                static_cast<unsigned long long>(cell.rollouts), cell.mean);
    return 0;
  }

  if (ablate->parsed()) {
    const SceneConfig cfg = scene_for(ab_common.scene, ab_common.query);
    const auto s = require_seeds(seeds);
    const fs::path dir(output_path(ab_common.out));
    const bool ts = !ab_common.no_timestamps;
    std::string json_path, csv_path, summary;
    if (robust->parsed()) {
      if (ab_episodes == 0) throw ConfigError("--episodes must be at least 1");
      const auto r = ablate_robustness(cfg, s, ab_episodes, ab_common.jobs);
      json_path = (dir / "robustness.json").string();
      csv_path = (dir / "robustness.csv").string();
      write_text(json_path, to_json(r, ts));
      write_text(csv_path, robustness_csv(r));
      char buf[200];
      std::snprintf(buf, sizeof buf, "failures per seed: naive %.2f, ccg %.2f, ccg+tr %.2f", r.conditions[0].mean,
                    r.conditions[1].mean, r.conditions[2].mean);
      summary = buf;
    } else if (noise->parsed()) {
      if (ab_episodes == 0) throw ConfigError("--episodes must be at least 1");
      NoiseAblationConfig nc;
      nc.episodes = ab_episodes;
      nc.rollouts = ab_rollouts;
      const auto r = ablate_noise(cfg, s, nc, ab_common.jobs);
      json_path = (dir / "noise.json").string();
      csv_path = (dir / "noise.csv").string();
      write_text(json_path, to_json(r, ts));
      write_text(csv_path, noise_csv(r));
      char buf[200];
      std::snprintf(buf, sizeof buf, "success: det %.1f, det+noise %.1f, gmm %.1f, gmm+noise %.1f", r.cells[0].mean,
                    r.cells[1].mean, r.cells[2].mean, r.cells[3].mean);
      summary = buf;
    } else {
      kcfg.sizes = sizes;
      const auto r = compare_kinesthetic(cfg, s, kcfg, ab_common.jobs);
      json_path = (dir / "kinesthetic.json").string();
      csv_path = (dir / "kinesthetic.csv").string();
      write_text(json_path, to_json(r, ts));
      write_text(csv_path, compare_csv(r));
      std::string line = "success pvp/kinesthetic:";
      char buf[64];
      for (const auto& p : r.points) {
        std::snprintf(buf, sizeof buf, " %zu: %.1f/%.1f", p.size, p.pvp.mean, p.kinesthetic.mean);
        line += buf;
      }
      summary = line;
    }
    std::cout << json_path << "\n" << csv_path << "\n" << summary << "\n";
    return 0;
  }

  if (stats->parsed()) {
    const DatasetStats st = dataset_stats(read_manifest(stats_data));
    const std::string text = stats_json(st);
    if (!stats_out.empty()) {
      const std::string out = output_path(stats_out);
      write_text(out, text);
      std::cout << out << "\n";
    }
    std::printf("%zu episodes, length %.2f (%.2f), range [%.0f, %.0f]\n", st.all.count, st.all.mean, st.all.std,
                st.all.min, st.all.max);
    return 0;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 3;
  } catch (const IntegrityError& e) {
    std::cerr << "integrity error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
