#include <algorithm>
#include <cmath>

#include "collect_internal.hpp"
#include "pvp/collect.hpp"

namespace pvp {

KinestheticConfig KinestheticConfig::sanity() {
  KinestheticConfig kc;
  kc.stretch_min = kc.stretch_max = 1.0;
  kc.jitter = 0.0;
  kc.overshoot_prob = 0.0;
  kc.idle_segment_probs = {1.0, 0.0, 0.0, 0.0};
  kc.delay_min = kc.delay_max = 0;
  return kc;
}

namespace {

int uniform_int(Rng& rng, int lo, int hi) { return hi <= lo ? lo : lo + static_cast<int>(rng.index(hi - lo + 1)); }

// Resamples the waypoint path to a new count by interpolating on the index parameter.
std::vector<Pose> retime(const std::vector<Pose>& w, double stretch) {
  const std::size_t m = w.size() - 1;
  const std::size_t m2 = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(m * stretch)));
  if (m2 == m) return w;
  std::vector<Pose> out;
  out.reserve(m2 + 1);
  for (std::size_t k = 0; k <= m2; ++k) {
    const double u = static_cast<double>(k) * m / m2;
    const std::size_t i = std::min(static_cast<std::size_t>(std::floor(u)), m - 1);
    out.push_back(k == m2 ? w.back() : interpolate(w[i], w[i + 1], std::clamp(u - i, 0.0, 1.0)));
  }
  return out;
}

}  // namespace

EpisodeResult run_kinesthetic_episode(const SceneConfig& cfg, const CollectConfig& cc_in, std::uint64_t seed,
                                      const KinestheticConfig& kc) {
  CollectConfig cc = cc_in;
  cc.noise_aug = false;
  detail::Retrieval r = detail::grasp_and_retrieve(cfg, cc, seed);
  r.meta.source = Source::kinesthetic;
  if (r.failed) {
    EpisodeResult out;
    out.episode.meta = r.meta;
    out.telemetry = r.telemetry;
    return out;
  }
  Rng rng(derive_seed(seed, detail::Stream::human));
  std::vector<Pose> w = retime(reversed(r.sparse).poses, rng.uniform(kc.stretch_min, kc.stretch_max + 1e-12));

  // The contact-critical tail (last quarter) is demonstrated carefully; the free-space part is not.
  const std::size_t free_end = perturbed_count(w.size(), 0.75);
  if (kc.jitter > 0.0) {
    for (std::size_t i = 1; i < free_end; ++i) {
      for (int a = 0; a < 3; ++a) w[i].translation[a] += rng.normal(kc.jitter);
    }
  }
  std::vector<Pose> out;
  out.reserve(w.size() + 24);
  const bool overshoot = free_end > 2 && rng.bernoulli(kc.overshoot_prob);
  const std::size_t over_at = overshoot ? 1 + rng.index(free_end - 2) : 0;

  double u = rng.uniform01();
  int idle_segments = 0;
  for (std::size_t n = 0; n < kc.idle_segment_probs.size(); ++n) {
    if (u < kc.idle_segment_probs[n]) {
      idle_segments = static_cast<int>(n);
      break;
    }
    u -= kc.idle_segment_probs[n];
  }
  std::vector<std::pair<std::size_t, int>> idles;
  for (int i = 0; i < idle_segments && free_end > 0; ++i) {
    idles.emplace_back(rng.index(free_end), uniform_int(rng, kc.idle_min, kc.idle_max));
  }

  for (std::size_t i = 0; i < w.size(); ++i) {
    out.push_back(w[i]);
    for (const auto& [at, len] : idles) {
      if (at == i) out.insert(out.end(), len, w[i]);
    }
    if (overshoot && i == over_at) {
      Pose past = w[i];
      const Vec3 dir = w[i].translation - w[i - 1].translation;
      if (dir.norm() > 1e-9) past.translation += dir.normalized() * kc.overshoot;
      out.push_back(past);
      out.push_back(w[i]);
    }
  }
  out.insert(out.end(), uniform_int(rng, kc.delay_min, kc.delay_max), w.back());
  return detail::place_rollout(std::move(r), out, cc);
}

}  // namespace pvp
