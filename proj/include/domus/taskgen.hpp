#pragma once

#include <optional>
#include <string>
#include <vector>

#include "domus/navgrid.hpp"
#include "domus/simcore.hpp"
#include "domus/worldgen.hpp"

namespace domus::taskgen {

using worldgen::Catalog;
using worldgen::House;
using worldgen::ObjectInstance;
using worldgen::Room;

enum class TaskKind : uint8_t {
  ObjectNav = 0,
  PickUp,
  Fetch,
  RoomVisit,
  ObjectNavRoom,
  ObjectNavRelAttribute,
  ObjectNavAffordance,
  ObjectNavLocalRef,
  ObjectNavOpenVocab,
  RoomNav,
};
constexpr int kNumTaskKinds = 10;

const char* task_kind_name(TaskKind k);
TaskKind task_kind_from_name(const std::string& name);

enum class RelAttribute : uint8_t {
  Smallest = 0,
  Largest,
  Highest,
  Lowest,
  NearestTo,
  FurthestFrom,
};
constexpr int kNumRelAttributes = 6;
const char* rel_attribute_name(RelAttribute a);

struct TaskSpec {
  TaskKind kind = TaskKind::ObjectNav;
  uint64_t house_seed = 0;
  sim::AgentState spawn;
  std::string instruction;

  int target_synset = -1;  // object kinds; the hypernym for Affordance
  int room_type = -1;      // ObjectNavRoom / RelAttr scope; RoomNav goal
  int target_room = -1;    // scoped room id (Room / RelAttr / LocalRef bookkeeping)
  bool has_attribute = false;
  RelAttribute attribute = RelAttribute::Smallest;
  int anchor_object = -1;
  std::string affordance;
  int local_mode = -1;  // 0 = near two references, 1 = on a reference
  int ref_synset_a = -1;
  int ref_synset_b = -1;
  int target_asset = -1;  // OpenVocab
  std::string description;
  std::vector<int> valid_target_ids;

  bool operator==(const TaskSpec&) const = default;
};

std::string task_to_json(const Catalog& catalog, const TaskSpec& spec);
TaskSpec task_from_json(const Catalog& catalog, const std::string& text);

// Balancing counters shared across one sampling campaign.
struct SamplerCounters {
  std::vector<int> synset;       // sized to the taxonomy
  std::vector<int> attribute;    // 6
  std::vector<int> room_type;    // 4

  explicit SamplerCounters(const Catalog& catalog)
      : synset(catalog.taxonomy.size(), 0),
        attribute(kNumRelAttributes, 0),
        room_type(worldgen::kNumRoomTypes, 0) {}
};

// Per-house sampling context: navigation grid plus filter memoization.
struct HouseContext {
  const Catalog* catalog = nullptr;
  const House* house = nullptr;
  nav::NavGrid grid;

  HouseContext(const Catalog& cat, const House& h);

  bool navigation_filter(const ObjectInstance& obj) const;
  bool manipulation_filter(const ObjectInstance& obj) const;

  // Main-component free cells inside a room (cached).
  const std::vector<int>& room_free_cells(int room_id) const;
  // Synsets labelling at least one object in the house.
  const std::vector<int>& scene_synsets() const { return scene_synsets_; }

 private:
  mutable std::vector<int8_t> nav_cache_;
  mutable std::vector<std::vector<int>> room_cells_;
  std::vector<int> scene_synsets_;
};

// Anchor instances in `room`: the eight anchor synsets, unique per room.
std::vector<int> anchor_objects(const HouseContext& ctx, const Room& room);

// Geometry-only threshold checks, exposed for table-driven tests. `dims`
// sorted ascending is taken inside.
bool passes_size_thresholds(Vec3 dims);

std::optional<TaskSpec> sample_task(TaskKind kind, const HouseContext& ctx,
                                    SamplerCounters& counters, Rng& rng);

std::string instruction_text(const Catalog& catalog, const House& house,
                             const TaskSpec& spec, Rng& rng);

// Restriction applied by micro-scale configs: only these synsets are drawn
// as targets (empty = no restriction).
struct SamplerOptions {
  std::vector<int> target_synsets;
};
std::optional<TaskSpec> sample_task(TaskKind kind, const HouseContext& ctx,
                                    SamplerCounters& counters, Rng& rng,
                                    const SamplerOptions& opts);

}  // namespace domus::taskgen
