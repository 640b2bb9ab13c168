#include "domus/metrics.hpp"

#include <set>

namespace domus::bench {

using taskgen::TaskKind;

EpisodeResult judge(const sim::Sim& end, const taskgen::TaskSpec& task,
                    const RolloutLog& log) {
  EpisodeResult r;
  r.kind = task.kind;
  r.agent_length = static_cast<int>(log.actions.size());
  r.rooms_total = static_cast<int>(end.house().rooms.size());

  std::set<int> entered;
  if (log.initial_room >= 0) entered.insert(log.initial_room);
  for (int room : log.rooms)
    if (room >= 0) entered.insert(room);
  r.rooms_visited = static_cast<int>(entered.size());

  auto any_target_visible = [&]() {
    for (int id : task.valid_target_ids)
      for (sim::Camera cam : {sim::Camera::Nav, sim::Camera::Manip})
        if (end.object_visible(cam, id)) return true;
    return false;
  };

  switch (task.kind) {
    case TaskKind::ObjectNav:
    case TaskKind::ObjectNavRoom:
    case TaskKind::ObjectNavRelAttribute:
    case TaskKind::ObjectNavAffordance:
    case TaskKind::ObjectNavLocalRef:
    case TaskKind::ObjectNavOpenVocab:
      r.success = log.terminated && any_target_visible();
      break;
    case TaskKind::PickUp:
    case TaskKind::Fetch: {
      const int held = end.state().arm.held_object;
      r.success = log.terminated &&
                  std::find(task.valid_target_ids.begin(), task.valid_target_ids.end(),
                            held) != task.valid_target_ids.end();
      r.soft_success = log.pickup_within_radius;
      break;
    }
    case TaskKind::RoomVisit: {
      std::set<int> subdone_rooms;
      for (size_t i = 0; i < log.actions.size(); ++i)
        if (log.actions[i] == sim::Action::SubDone && log.rooms[i] >= 0)
          subdone_rooms.insert(log.rooms[i]);
      bool all = log.terminated;
      for (const auto& room : end.house().rooms) {
        if (!entered.count(room.id) || !subdone_rooms.count(room.id)) {
          all = false;
          break;
        }
      }
      r.success = all;
      break;
    }
    case TaskKind::RoomNav: {
      const int room = end.house().room_at(end.state().pose.xy());
      r.success = log.terminated && room >= 0 &&
                  static_cast<int>(end.house().rooms[room].type) == task.room_type;
      break;
    }
  }
  return r;
}

}  // namespace domus::bench
