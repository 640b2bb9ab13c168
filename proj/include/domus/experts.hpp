#pragma once

#include <optional>
#include <vector>

#include "domus/metrics.hpp"
#include "domus/navgrid.hpp"
#include "domus/taskgen.hpp"

namespace domus::experts {

using taskgen::HouseContext;
using taskgen::TaskKind;
using taskgen::TaskSpec;

struct PlannedPath {
  std::vector<Vec2> waypoints;
  double total_length = 0.0;
};

// A* over the inflated occupancy grid (8-connected, octile heuristic) with
// string-pulling smoothing. Empty result when unreachable.
std::optional<PlannedPath> plan_shortest_path(const nav::NavGrid& grid, Vec2 from,
                                              Vec2 to);

// Multi-goal variant: shortest path to the nearest of `goal_cells`.
std::optional<PlannedPath> plan_to_cells(const nav::NavGrid& grid, Vec2 from,
                                         const std::vector<int>& goal_cells);

struct TrajectoryStep {
  sim::Observation obs;  // observation before the action
  sim::Action action;
};

struct ExpertTrajectory {
  TaskSpec task;
  std::vector<TrajectoryStep> steps;
  bool success = false;
  int expert_length = 0;
  bool pickup_retried = false;
};

struct ExpertOptions {
  int step_cap = 600;
  int room_visit_cap = 1000;
  double waypoint_tolerance = 0.25;
  bool exploration = false;  // ObjectNav via the exploration planner
};

// Privileged planner for the task's kind. Returns nothing when any phase
// fails; retained trajectories replay to success deterministically.
std::optional<ExpertTrajectory> run_expert(const HouseContext& ctx, const TaskSpec& task,
                                           Rng& rng, const ExpertOptions& opts = {});

// Object-centric exploration planner (ObjectNav only): depth-first over
// rooms, steering toward unseen objects until 75% of a room is seen.
std::optional<ExpertTrajectory> run_exploration_expert(const HouseContext& ctx,
                                                       const TaskSpec& task, Rng& rng,
                                                       const ExpertOptions& opts = {});

}  // namespace domus::experts
