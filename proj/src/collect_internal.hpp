#pragma once

#include "pvp/collect.hpp"

namespace pvp::detail {

/// State handed from the grasp/retrieve phases to a place rollout.
struct Retrieval {
  WorldState world;  // at the end of retrieval
  SparseTrajectory sparse;
  EpisodeMeta meta;
  EpisodeTelemetry telemetry;
  bool failed = false;
};

enum Stream : std::uint64_t { plan = 1, align = 2, retrieve = 3, clearance = 4, noise = 5, human = 6 };

Retrieval grasp_and_retrieve(const SceneConfig& cfg, const CollectConfig& cc, std::uint64_t seed);

/// Moves to the first waypoint, then executes actions between consecutive waypoints followed by n_open open steps.
EpisodeResult place_rollout(Retrieval r, const std::vector<Pose>& waypoints, const CollectConfig& cc);

}  // namespace pvp::detail
