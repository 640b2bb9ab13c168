#include "domus/experts.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>

namespace domus::experts {

using nav::NavGrid;
using sim::Action;
using sim::Sim;
using worldgen::House;

namespace {

constexpr double kRotateFineThreshold = 9.0;   // deg; move when within this
constexpr double kRotateCoarseThreshold = 18.0;  // deg; use 30-deg turns above
constexpr int kReplanBudget = 5;
constexpr int kStuckWindow = 10;
constexpr double kStuckDisplacement = 0.05;

double bearing_deg(Vec2 v) { return std::atan2(v.y, v.x) * 180.0 / M_PI; }

struct AstarNode {
  double f;
  double g;
  int idx;
  bool operator>(const AstarNode& o) const {
    if (f != o.f) return f > o.f;
    if (g != o.g) return g < o.g;  // prefer the deeper node on f ties
    return idx > o.idx;
  }
};

std::optional<std::vector<int>> grid_search(const NavGrid& grid, int start,
                                            const std::vector<int>& goals,
                                            bool use_heuristic) {
  if (start < 0 || grid.blocked[start]) return std::nullopt;
  std::vector<uint8_t> is_goal(grid.blocked.size(), 0);
  bool any_goal = false;
  for (int g : goals)
    if (g >= 0 && !grid.blocked[g]) {
      is_goal[g] = 1;
      any_goal = true;
    }
  if (!any_goal) return std::nullopt;

  // Octile heuristic against the nearest goal (admissible for one goal;
  // multi-goal search runs as plain Dijkstra).
  Vec2 goal_pt{};
  if (use_heuristic) goal_pt = grid.center(goals[0]);
  auto h = [&](int idx) {
    if (!use_heuristic) return 0.0;
    const Vec2 c = grid.center(idx);
    const double dx = std::abs(c.x - goal_pt.x), dy = std::abs(c.y - goal_pt.y);
    return std::max(dx, dy) + (std::sqrt(2.0) - 1.0) * std::min(dx, dy);
  };

  std::vector<double> g_cost(grid.blocked.size(), std::numeric_limits<double>::infinity());
  std::vector<int32_t> parent(grid.blocked.size(), -1);
  std::priority_queue<AstarNode, std::vector<AstarNode>, std::greater<>> open;
  g_cost[start] = 0.0;
  open.push({h(start), 0.0, start});
  const double kDiag = nav::kCell * std::sqrt(2.0);
  while (!open.empty()) {
    const AstarNode node = open.top();
    open.pop();
    if (node.g > g_cost[node.idx]) continue;
    if (is_goal[node.idx]) {
      std::vector<int> cells;
      for (int c = node.idx; c >= 0; c = parent[c]) cells.push_back(c);
      std::reverse(cells.begin(), cells.end());
      return cells;
    }
    const int x = node.idx % grid.nx, y = node.idx / grid.nx;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        if (!grid.is_free(x + dx, y + dy)) continue;
        if (dx != 0 && dy != 0 && (!grid.is_free(x + dx, y) || !grid.is_free(x, y + dy)))
          continue;
        const int ni = grid.index(x + dx, y + dy);
        const double ng = node.g + ((dx != 0 && dy != 0) ? kDiag : nav::kCell);
        if (ng < g_cost[ni]) {
          g_cost[ni] = ng;
          parent[ni] = node.idx;
          open.push({ng + h(ni), ng, ni});
        }
      }
    }
  }
  return std::nullopt;
}

PlannedPath smooth(const NavGrid& grid, std::vector<Vec2> pts) {
  PlannedPath path;
  if (pts.empty()) return path;
  size_t i = 0;
  path.waypoints.push_back(pts[0]);
  while (i + 1 < pts.size()) {
    size_t best = i + 1;
    for (size_t j = pts.size() - 1; j > i + 1; --j) {
      if (grid.line_free(pts[i], pts[j])) {
        best = j;
        break;
      }
    }
    path.waypoints.push_back(pts[best]);
    i = best;
  }
  for (size_t k = 1; k < path.waypoints.size(); ++k)
    path.total_length += dist(path.waypoints[k - 1], path.waypoints[k]);
  return path;
}

std::optional<PlannedPath> plan_impl(const NavGrid& grid, Vec2 from,
                                     const std::vector<int>& goals, bool heuristic,
                                     std::optional<Vec2> exact_goal) {
  const int start = grid.cell_at(from);
  auto cells = grid_search(grid, start, goals, heuristic);
  if (!cells) return std::nullopt;
  std::vector<Vec2> pts;
  pts.push_back(from);
  for (size_t i = 1; i < cells->size(); ++i) pts.push_back(grid.center((*cells)[i]));
  if (exact_goal && !cells->empty()) {
    if (cells->size() == 1) {
      if (!(*exact_goal == pts.back())) pts.push_back(*exact_goal);
    } else {
      pts.back() = *exact_goal;
    }
  }
  return smooth(grid, std::move(pts));
}

}  // namespace

std::optional<PlannedPath> plan_shortest_path(const NavGrid& grid, Vec2 from, Vec2 to) {
  const int goal = grid.cell_at(to);
  if (goal < 0 || grid.blocked[goal]) return std::nullopt;
  return plan_impl(grid, from, {goal}, true, to);
}

std::optional<PlannedPath> plan_to_cells(const NavGrid& grid, Vec2 from,
                                         const std::vector<int>& goal_cells) {
  return plan_impl(grid, from, goal_cells, false, std::nullopt);
}

namespace {

// Step recorder around one simulator; fails closed when the cap is hit.
class Run {
 public:
  Run(const HouseContext& ctx, const TaskSpec& task, int cap)
      : ctx_(ctx), task_(task), cap_(cap), sim_(*ctx.catalog, *ctx.house) {
    sim_.spawn(task.spawn.pose.x, task.spawn.pose.y, task.spawn.pose.theta);
    log_.reset(sim_);
  }

  bool act(Action a) {
    if (failed_ || static_cast<int>(steps_.size()) >= cap_) {
      failed_ = true;
      return false;
    }
    TrajectoryStep st;
    st.obs = sim_.observe(task_.valid_target_ids);
    st.action = a;
    steps_.push_back(std::move(st));
    last_ = log_.apply(sim_, a, task_.valid_target_ids);
    return true;
  }

  const Sim& sim() const { return sim_; }
  Vec2 pos() const { return sim_.state().pose.xy(); }
  double theta() const { return sim_.state().pose.theta; }
  const sim::StepResult& last() const { return last_; }
  bool failed() const { return failed_; }
  void fail() { failed_ = true; }
  int held() const { return sim_.state().arm.held_object; }
  const bench::RolloutLog& log() const { return log_; }
  std::vector<TrajectoryStep>&& take_steps() { return std::move(steps_); }
  const HouseContext& ctx() const { return ctx_; }

 private:
  const HouseContext& ctx_;
  const TaskSpec& task_;
  int cap_;
  Sim sim_;
  bench::RolloutLog log_;
  std::vector<TrajectoryStep> steps_;
  sim::StepResult last_;
  bool failed_ = false;
};

bool rotate_toward(Run& run, double err) {
  if (err > kRotateCoarseThreshold) return run.act(Action::RotateLeft30);
  if (err > 0) return run.act(Action::RotateLeft6);
  if (err < -kRotateCoarseThreshold) return run.act(Action::RotateRight30);
  return run.act(Action::RotateRight6);
}

// Rotates until `camera` points within the fine threshold of `point`.
bool align_camera(Run& run, Vec2 point, sim::Camera camera) {
  for (int iter = 0; iter < 120; ++iter) {
    const Vec2 v = point - run.pos();
    if (norm2(v) < 1e-12) return true;
    const double err = angle_diff_deg(bearing_deg(v), run.sim().camera_heading(camera));
    if (std::abs(err) <= kRotateFineThreshold) return true;
    if (!rotate_toward(run, err)) return false;
  }
  return false;
}

// Rotates the base heading to an exact multiple-of-6 target.
bool align_heading(Run& run, double target) {
  for (int iter = 0; iter < 80; ++iter) {
    const double err = angle_diff_deg(target, run.theta());
    if (std::abs(err) < 1e-9) return true;
    if (std::abs(err) >= 30.0) {
      if (!run.act(err > 0 ? Action::RotateLeft30 : Action::RotateRight30)) return false;
    } else {
      if (!run.act(err > 0 ? Action::RotateLeft6 : Action::RotateRight6)) return false;
    }
  }
  return false;
}

// Greedy waypoint follower; replans when blocked or stuck. `stop_when`
// short-circuits navigation once satisfied (may be null).
template <typename StopFn>
bool navigate(Run& run, const std::vector<int>& goal_cells, double tolerance,
              StopFn&& stop_when) {
  const NavGrid& grid = run.ctx().grid;
  auto path = plan_to_cells(grid, run.pos(), goal_cells);
  if (!path) return false;
  int replans = 0;
  size_t wpi = path->waypoints.size() > 1 ? 1 : 0;
  int moves_since_progress = 0;
  Vec2 progress_anchor = run.pos();
  double best_goal_dist = dist(run.pos(), path->waypoints.back());
  int moves_without_goal_progress = 0;

  for (int iter = 0; iter < 4000; ++iter) {
    if (stop_when()) return true;
    const Vec2 pos = run.pos();
    if (dist(pos, path->waypoints.back()) <= tolerance) return true;
    // Interior waypoints advance within a fixed window: wide enough for the
    // 0.2 m step lattice, narrow enough to limit corner cutting.
    while (wpi + 1 < path->waypoints.size() && dist(pos, path->waypoints[wpi]) < 0.15)
      ++wpi;
    const Vec2 target = path->waypoints[wpi];
    const Vec2 v = target - pos;
    if (norm2(v) < 1e-12) {
      if (wpi + 1 < path->waypoints.size()) {
        ++wpi;
        continue;
      }
      return true;
    }
    const double err = angle_diff_deg(bearing_deg(v), run.theta());
    if (std::abs(err) > kRotateFineThreshold) {
      if (!rotate_toward(run, err)) return false;
      continue;
    }
    if (!run.act(Action::MoveBaseFwd)) return false;
    bool need_replan = false;
    if (run.last().event == sim::StepEvent::Blocked) {
      need_replan = true;
    } else {
      if (dist(run.pos(), progress_anchor) >= kStuckDisplacement) {
        progress_anchor = run.pos();
        moves_since_progress = 0;
      } else if (++moves_since_progress >= kStuckWindow) {
        need_replan = true;
      }
      // Oscillation around a waypoint: moving without closing on the goal.
      const double gd = dist(run.pos(), path->waypoints.back());
      if (gd < best_goal_dist - 0.02) {
        best_goal_dist = gd;
        moves_without_goal_progress = 0;
      } else if (++moves_without_goal_progress >= 2 * kStuckWindow) {
        need_replan = true;
      }
    }
    if (need_replan) {
      if (++replans > kReplanBudget) return false;
      path = plan_to_cells(grid, run.pos(), goal_cells);
      if (!path) return false;
      wpi = path->waypoints.size() > 1 ? 1 : 0;
      moves_since_progress = 0;
      progress_anchor = run.pos();
      best_goal_dist = dist(run.pos(), path->waypoints.back());
      moves_without_goal_progress = 0;
    }
  }
  return false;
}

bool navigate(Run& run, const std::vector<int>& goal_cells, double tolerance) {
  return navigate(run, goal_cells, tolerance, [] { return false; });
}

bool drive_extension(Run& run, double target) {
  for (int iter = 0; iter < 120; ++iter) {
    const double err = target - run.sim().state().arm.extension;
    if (std::abs(err) <= 0.005) return true;
    Action a;
    if (err >= 0.06) a = Action::ArmExtendLarge;
    else if (err > 0) a = Action::ArmExtendSmall;
    else if (err <= -0.06) a = Action::ArmRetractLarge;
    else a = Action::ArmRetractSmall;
    if (!run.act(a)) return false;
  }
  return false;
}

bool drive_lift(Run& run, double target) {
  for (int iter = 0; iter < 160; ++iter) {
    const double err = target - run.sim().state().arm.lift;
    if (std::abs(err) <= 0.005) return true;
    Action a;
    if (err >= 0.06) a = Action::ArmUpLarge;
    else if (err > 0) a = Action::ArmUpSmall;
    else if (err <= -0.06) a = Action::ArmDownLarge;
    else a = Action::ArmDownSmall;
    if (!run.act(a)) return false;
  }
  return false;
}

bool drive_wrist(Run& run, double target) {
  for (int iter = 0; iter < 40; ++iter) {
    const double err = angle_diff_deg(target, run.sim().state().arm.wrist_deg);
    if (std::abs(err) <= 5.0) return true;
    if (!run.act(err > 0 ? Action::WristLeft : Action::WristRight)) return false;
  }
  return false;
}

// Seven-phase scripted grasp. Assumes the base is at a pose with a reach
// solution; retries once on the random branch or a near-miss.
bool pickup_subroutine(Run& run, int target_id, Rng& rng, bool& retried) {
  const auto& obj = run.sim().house().objects[target_id];
  const Vec3 target = obj.position;
  auto sol = nav::solve_reach(run.pos(), target);
  if (!sol) return false;
  if (!align_heading(run, sol->theta)) return false;

  // (1) raise above the target height
  const double hover = std::min(sol->lift + 0.04, sim::kLiftMax);
  if (!drive_lift(run, hover)) return false;
  // (2) wrist outward
  if (!drive_wrist(run, 0.0)) return false;
  // (3) reach out to the target depth
  if (!drive_extension(run, sol->extension)) return false;
  // (4) wrist toward the target
  {
    const Vec2 v{target.x - run.pos().x, target.y - run.pos().y};
    const double rel =
        angle_diff_deg(bearing_deg(v), wrap_deg(run.theta() - 90.0));
    const double wrist = std::clamp(std::round(rel / 10.0) * 10.0, -20.0, 20.0);
    if (!drive_wrist(run, wrist)) return false;
  }
  // (5) descend to contact height
  if (!drive_lift(run, sol->lift)) return false;

  // (6) close the gripper, with the 20% deliberate near-miss retry that
  // teaches local correction.
  if (rng.chance(0.2)) {
    retried = true;
    const bool up = run.sim().state().arm.lift <= sim::kLiftMax - 0.10;
    if (!run.act(up ? Action::ArmUpLarge : Action::ArmDownLarge)) return false;
    if (!run.act(Action::Pickup)) return false;
    if (run.held() >= 0) return false;  // grabbed something else; discard
    if (!run.act(up ? Action::ArmDownLarge : Action::ArmUpLarge)) return false;
    if (!run.act(Action::Pickup)) return false;
  } else {
    if (!run.act(Action::Pickup)) return false;
    if (run.held() < 0) {
      // Natural miss: recoverable inside 9 cm.
      const double d = dist(sim::gripper_position(run.sim().state()), target);
      if (d > 0.09) return false;
      retried = true;
      auto sol2 = nav::solve_reach(run.pos(), target);
      if (!sol2) return false;
      if (!align_heading(run, sol2->theta)) return false;
      if (!drive_extension(run, sol2->extension)) return false;
      if (!drive_lift(run, sol2->lift)) return false;
      if (!run.act(Action::Pickup)) return false;
    }
  }
  if (run.held() < 0) return false;
  // (7) slight lift with the object in hand
  if (!run.act(Action::ArmUpSmall)) return false;
  return true;
}

// Nearest valid target by geodesic grid distance, with its interactable cells.
struct TargetChoice {
  int object_id = -1;
  std::vector<int> cells;
};

std::optional<TargetChoice> nearest_target(const HouseContext& ctx, Vec2 from,
                                           const std::vector<int>& target_ids) {
  const int start = ctx.grid.cell_at(from);
  const auto df = nav::grid_distances(ctx.grid, start);
  TargetChoice best;
  double best_d = std::numeric_limits<double>::infinity();
  for (int id : target_ids) {
    const auto& obj = ctx.house->objects[id];
    auto cells = nav::interactable_cells(ctx.grid, *ctx.house, obj);
    double d = std::numeric_limits<double>::infinity();
    for (const auto& ic : cells) d = std::min(d, df.at(ic.cell));
    if (d < best_d) {
      best_d = d;
      best.object_id = id;
      best.cells.clear();
      // Prefer cells with slack inside the reach annulus, so landing within
      // the goal tolerance still leaves an arm solution.
      std::vector<int> inner;
      for (const auto& ic : cells) {
        const Vec2 c = ctx.grid.center(ic.cell);
        if (dist(c, Vec2{obj.position.x, obj.position.y}) <= 0.95)
          inner.push_back(ic.cell);
      }
      if (!inner.empty()) {
        best.cells = std::move(inner);
      } else {
        for (const auto& ic : cells) best.cells.push_back(ic.cell);
      }
    }
  }
  if (best.object_id < 0 || best.cells.empty()) return std::nullopt;
  return best;
}

std::vector<int> room_dfs_order(const House& house, int start_room) {
  std::vector<std::vector<int>> adj(house.rooms.size());
  for (const auto& d : house.doors) {
    adj[d.room_a].push_back(d.room_b);
    adj[d.room_b].push_back(d.room_a);
  }
  for (auto& v : adj) std::sort(v.begin(), v.end());
  std::vector<int> order;
  std::vector<bool> seen(house.rooms.size(), false);
  std::vector<int> stack{start_room};
  while (!stack.empty()) {
    const int r = stack.back();
    stack.pop_back();
    if (seen[r]) continue;
    seen[r] = true;
    order.push_back(r);
    for (auto it = adj[r].rbegin(); it != adj[r].rend(); ++it)
      if (!seen[*it]) stack.push_back(*it);
  }
  return order;
}

std::vector<int> room_center_cells(const HouseContext& ctx, int room) {
  // The center cell plus a small neighborhood, in case the exact cell is
  // inside the inflation ring of nearby furniture.
  std::vector<int> cells;
  const Vec2 c = ctx.house->rooms[room].center();
  const int idx = ctx.grid.cell_at(c);
  if (idx >= 0 && ctx.grid.in_main(idx)) cells.push_back(idx);
  if (cells.empty()) {
    for (int dy = -3; dy <= 3; ++dy)
      for (int dx = -3; dx <= 3; ++dx) {
        const int i = ctx.grid.cell_at({c.x + dx * nav::kCell, c.y + dy * nav::kCell});
        if (i >= 0 && ctx.grid.in_main(i)) cells.push_back(i);
      }
  }
  return cells;
}

std::optional<ExpertTrajectory> finish(Run& run, const TaskSpec& task, bool retried) {
  if (run.failed()) return std::nullopt;
  const auto result = bench::judge(run.sim(), task, run.log());
  if (!result.success) return std::nullopt;
  ExpertTrajectory traj;
  traj.task = task;
  traj.steps = run.take_steps();
  traj.success = true;
  traj.expert_length = static_cast<int>(traj.steps.size());
  traj.pickup_retried = retried;
  return traj;
}

std::optional<ExpertTrajectory> navigate_family_expert(const HouseContext& ctx,
                                                       const TaskSpec& task,
                                                       const ExpertOptions& opts) {
  Run run(ctx, task, opts.step_cap);
  auto choice = nearest_target(ctx, run.pos(), task.valid_target_ids);
  if (!choice) return std::nullopt;
  if (!navigate(run, choice->cells, opts.waypoint_tolerance)) return std::nullopt;
  const auto& obj = ctx.house->objects[choice->object_id];
  if (!align_camera(run, {obj.position.x, obj.position.y}, sim::Camera::Nav))
    return std::nullopt;
  if (!run.act(Action::Terminate)) return std::nullopt;
  return finish(run, task, false);
}

std::optional<ExpertTrajectory> manipulation_expert(const HouseContext& ctx,
                                                    const TaskSpec& task, Rng& rng,
                                                    const ExpertOptions& opts) {
  Run run(ctx, task, opts.step_cap);
  auto choice = nearest_target(ctx, run.pos(), task.valid_target_ids);
  if (!choice) return std::nullopt;
  const Vec3 target = ctx.house->objects[choice->object_id].position;
  const auto reachable = [&] {
    return nav::solve_reach(run.pos(), target).has_value();
  };
  // Tight goal tolerance: approach until an arm solution exists.
  if (!navigate(run, choice->cells, 0.06, reachable)) return std::nullopt;
  if (!reachable()) return std::nullopt;
  bool retried = false;
  if (!pickup_subroutine(run, choice->object_id, rng, retried)) return std::nullopt;
  if (!run.act(Action::Terminate)) return std::nullopt;
  return finish(run, task, retried);
}

std::optional<ExpertTrajectory> room_visit_expert(const HouseContext& ctx,
                                                  const TaskSpec& task,
                                                  const ExpertOptions& opts) {
  Run run(ctx, task, opts.room_visit_cap);
  const int start_room = ctx.house->room_at(run.pos());
  if (start_room < 0) return std::nullopt;
  for (int room : room_dfs_order(*ctx.house, start_room)) {
    const auto cells = room_center_cells(ctx, room);
    if (cells.empty()) return std::nullopt;
    if (!navigate(run, cells, opts.waypoint_tolerance)) return std::nullopt;
    if (!run.act(Action::SubDone)) return std::nullopt;
  }
  if (!run.act(Action::Terminate)) return std::nullopt;
  return finish(run, task, false);
}

std::optional<ExpertTrajectory> room_nav_expert(const HouseContext& ctx,
                                                const TaskSpec& task,
                                                const ExpertOptions& opts) {
  Run run(ctx, task, opts.step_cap);
  std::vector<int> cells;
  for (const auto& room : ctx.house->rooms)
    if (static_cast<int>(room.type) == task.room_type)
      for (int c : room_center_cells(ctx, room.id)) cells.push_back(c);
  if (cells.empty()) return std::nullopt;
  if (!navigate(run, cells, opts.waypoint_tolerance)) return std::nullopt;
  if (!run.act(Action::Terminate)) return std::nullopt;
  return finish(run, task, false);
}

}  // namespace

std::optional<ExpertTrajectory> run_expert(const HouseContext& ctx, const TaskSpec& task,
                                           Rng& rng, const ExpertOptions& opts) {
  switch (task.kind) {
    case TaskKind::ObjectNav:
      if (opts.exploration) return run_exploration_expert(ctx, task, rng, opts);
      return navigate_family_expert(ctx, task, opts);
    case TaskKind::ObjectNavRoom:
    case TaskKind::ObjectNavRelAttribute:
    case TaskKind::ObjectNavAffordance:
    case TaskKind::ObjectNavLocalRef:
    case TaskKind::ObjectNavOpenVocab:
      return navigate_family_expert(ctx, task, opts);
    case TaskKind::PickUp:
    case TaskKind::Fetch:
      return manipulation_expert(ctx, task, rng, opts);
    case TaskKind::RoomVisit:
      return room_visit_expert(ctx, task, opts);
    case TaskKind::RoomNav:
      return room_nav_expert(ctx, task, opts);
  }
  return std::nullopt;
}

std::optional<ExpertTrajectory> run_exploration_expert(const HouseContext& ctx,
                                                       const TaskSpec& task, Rng&,
                                                       const ExpertOptions& opts) {
  if (task.kind != TaskKind::ObjectNav) return std::nullopt;
  Run run(ctx, task, opts.step_cap);
  const House& house = *ctx.house;

  std::set<int> seen;
  auto update_seen = [&] {
    for (sim::Camera cam : {sim::Camera::Nav, sim::Camera::Manip})
      for (int id : run.sim().visible_objects(cam)) seen.insert(id);
  };
  auto target_seen = [&] {
    for (int id : task.valid_target_ids)
      if (seen.count(id)) return true;
    return false;
  };
  update_seen();

  const int start_room = house.room_at(run.pos());
  if (start_room < 0) return std::nullopt;
  for (int room : room_dfs_order(house, start_room)) {
    if (target_seen()) break;
    const auto center = room_center_cells(ctx, room);
    if (center.empty()) return std::nullopt;
    if (!navigate(run, center, opts.waypoint_tolerance, [&] {
          update_seen();
          return target_seen();
        }))
      return std::nullopt;

    // Approach unseen objects until 75% of this room is covered.
    for (int rounds = 0; rounds < 64 && !target_seen(); ++rounds) {
      std::vector<int> room_objects, unseen;
      for (const auto& o : house.objects)
        if (o.room == room) {
          room_objects.push_back(o.id);
          if (!seen.count(o.id)) unseen.push_back(o.id);
        }
      if (room_objects.empty()) break;
      const double frac =
          1.0 - static_cast<double>(unseen.size()) / room_objects.size();
      if (frac >= 0.75) break;

      // Nearest unseen object by straight-line distance.
      int pick = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int id : unseen) {
        const auto& o = house.objects[id];
        const double d = dist(run.pos(), Vec2{o.position.x, o.position.y});
        if (d < best) {
          best = d;
          pick = id;
        }
      }
      const auto& o = house.objects[pick];
      std::vector<int> goal_cells;
      const int oc = ctx.grid.cell_at(Vec2{o.position.x, o.position.y});
      for (int dy = -24; dy <= 24; ++dy)
        for (int dx = -24; dx <= 24; ++dx) {
          if (dx * dx + dy * dy > 24 * 24) continue;
          const int xi = oc >= 0 ? oc % ctx.grid.nx + dx : -1;
          const int yi = oc >= 0 ? oc / ctx.grid.nx + dy : -1;
          if (!ctx.grid.is_free(xi, yi)) continue;
          const int idx = ctx.grid.index(xi, yi);
          if (ctx.grid.in_main(idx)) goal_cells.push_back(idx);
        }
      if (goal_cells.empty()) {
        seen.insert(pick);  // unreachable; treat as covered
        continue;
      }
      const bool arrived = navigate(run, goal_cells, opts.waypoint_tolerance, [&] {
        update_seen();
        return seen.count(pick) > 0 || target_seen();
      });
      if (!arrived) return std::nullopt;
      update_seen();
      seen.insert(pick);
    }
  }
  if (!target_seen()) return std::nullopt;

  auto choice = nearest_target(ctx, run.pos(), task.valid_target_ids);
  if (!choice) return std::nullopt;
  if (!navigate(run, choice->cells, opts.waypoint_tolerance)) return std::nullopt;
  const auto& obj = ctx.house->objects[choice->object_id];
  if (!align_camera(run, {obj.position.x, obj.position.y}, sim::Camera::Nav))
    return std::nullopt;
  if (!run.act(Action::Terminate)) return std::nullopt;
  return finish(run, task, false);
}

}  // namespace domus::experts
