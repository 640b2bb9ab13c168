#pragma once

#include <algorithm>
#include <vector>

#include "domus/simcore.hpp"
#include "domus/taskgen.hpp"

namespace domus::bench {

// Transcript of one rollout, enough to judge it without re-simulation
// (the terminal Sim supplies end-state visibility).
struct RolloutLog {
  int initial_room = -1;
  std::vector<sim::Action> actions;
  std::vector<Vec2> positions;     // base position after each action
  std::vector<int> rooms;          // room id after each action (-1 outside)
  std::vector<uint8_t> succeeded;  // per-action success flag
  bool terminated = false;         // Terminate issued before the cap
  bool pickup_within_radius = false;

  void reset(const sim::Sim& s) {
    *this = RolloutLog{};
    initial_room = s.house().room_at(s.state().pose.xy());
  }

  // Records `a` about to be applied, then steps the sim.
  sim::StepResult apply(sim::Sim& s, sim::Action a,
                        const std::vector<int>& valid_targets) {
    if (a == sim::Action::Pickup && !valid_targets.empty()) {
      const Vec3 g = sim::gripper_position(s.state());
      for (int id : valid_targets) {
        if (dist(g, s.house().objects[id].position) <= sim::kGraspRadius) {
          pickup_within_radius = true;
          break;
        }
      }
    }
    const auto res = s.step(a);
    actions.push_back(a);
    positions.push_back(s.state().pose.xy());
    rooms.push_back(s.house().room_at(s.state().pose.xy()));
    succeeded.push_back(res.action_succeeded ? 1 : 0);
    if (a == sim::Action::Terminate) terminated = true;
    return res;
  }
};

struct EpisodeResult {
  taskgen::TaskKind kind = taskgen::TaskKind::ObjectNav;
  bool success = false;
  bool soft_success = false;
  int agent_length = 0;
  int expert_length = 0;
  int rooms_visited = 0;
  int rooms_total = 0;
};

// Success-weighted expert/agent length ratio clamped at 1 (SPL-style, with
// lengths in steps).
inline double sel(bool success, int expert_length, int agent_length) {
  if (!success) return 0.0;
  return static_cast<double>(expert_length) /
         std::max(agent_length, expert_length);
}

inline double pct_rooms(int rooms_visited, int rooms_total) {
  return 100.0 * rooms_visited / std::max(rooms_total, 1);
}

// Judges a finished rollout. `end` is the simulator at the final step.
EpisodeResult judge(const sim::Sim& end, const taskgen::TaskSpec& task,
                    const RolloutLog& log);

}  // namespace domus::bench
