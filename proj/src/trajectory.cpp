#include "pvp/trajectory.hpp"

#include <algorithm>
#include <cmath>

#include "pvp/errors.hpp"

namespace pvp {

void DenseTrajectory::validate() const {
  if (entries.empty()) throw DomainError("dense trajectory is empty");
  if (entries.front().t != 0.0) throw DomainError("dense trajectory must start at t = 0");
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (!(entries[i].t > entries[i - 1].t)) throw DomainError("dense trajectory timestamps must increase");
  }
}

std::size_t sample_count(double duration, double dt) {
  if (!(dt > 0.0)) throw DomainError("dt must be positive");
  const double r = duration / dt;
  const double nearest = std::round(r);
  if (std::abs(r - nearest) <= 1e-9 * std::max(1.0, nearest)) return static_cast<std::size_t>(nearest);
  return static_cast<std::size_t>(std::ceil(r));
}

SparseTrajectory downsample(const DenseTrajectory& d, double dt) {
  d.validate();
  const auto& e = d.entries;
  const std::size_t m = sample_count(e.back().t - e.front().t, dt);
  SparseTrajectory out;
  out.dt = dt;
  out.poses.reserve(m + 1);
  std::size_t j = 0;
  for (std::size_t k = 0; k <= m; ++k) {
    const double target = e.front().t + static_cast<double>(k) * dt;
    // Advance while the next entry is strictly closer; equal distance keeps the earlier one.
    while (j + 1 < e.size() && std::abs(e[j + 1].t - target) < std::abs(e[j].t - target)) ++j;
    out.poses.push_back(e[j].pose);
  }
  return out;
}

SparseTrajectory reversed(const SparseTrajectory& s) {
  SparseTrajectory out = s;
  std::reverse(out.poses.begin(), out.poses.end());
  return out;
}

std::vector<Action> actions_from_waypoints(const std::vector<Pose>& w, int n_open) {
  if (w.size() < 2) throw DomainError("need at least two waypoints");
  if (n_open < 0) throw DomainError("negative open-step count");
  std::vector<Action> out;
  out.reserve(w.size() - 1 + n_open);
  for (std::size_t i = 0; i + 1 < w.size(); ++i) out.push_back(Action::from(relative_action(w[i], w[i + 1]), 1));
  for (int i = 0; i < n_open; ++i) out.push_back(Action::open());
  return out;
}

std::vector<Action> reverse_to_actions(const SparseTrajectory& s, int n_open) {
  return actions_from_waypoints(reversed(s).poses, n_open);
}

}  // namespace pvp
