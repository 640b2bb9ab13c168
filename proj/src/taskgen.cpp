#include "domus/taskgen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

namespace domus::taskgen {

using nlohmann::json;
using worldgen::RoomType;

namespace {
constexpr int kSampleBudget = 50;
constexpr double kLocalRefNear = 0.50;
constexpr double kLocalRefAmbiguity = 2.0;

const char* kKindNames[kNumTaskKinds] = {
    "object_nav",   "pickup",        "fetch",          "room_visit",
    "object_nav_room", "object_nav_rel_attribute", "object_nav_affordance",
    "object_nav_local_ref", "object_nav_open_vocab", "room_nav"};

const char* kAttrNames[kNumRelAttributes] = {"smallest", "largest",  "highest",
                                             "lowest",   "nearest_to", "furthest_from"};

const char* kAnchorSynsets[] = {"bed.n.01",  "countertop.n.01",
                                "dining_table.n.01", "refrigerator.n.01",
                                "sink.n.01", "sofa.n.01",
                                "television_receiver.n.01", "toilet.n.02"};

const char* kNearExcluded[] = {"bed.n.01", "countertop.n.01", "sofa.n.01",
                               "shelf.n.01", "drawer.n.01"};
const char* kOnExcluded[] = {"shelf.n.01", "drawer.n.01"};

}  // namespace

const char* task_kind_name(TaskKind k) { return kKindNames[static_cast<int>(k)]; }

TaskKind task_kind_from_name(const std::string& name) {
  for (int i = 0; i < kNumTaskKinds; ++i)
    if (name == kKindNames[i]) return static_cast<TaskKind>(i);
  throw std::runtime_error("unknown task kind: " + name);
}

const char* rel_attribute_name(RelAttribute a) { return kAttrNames[static_cast<int>(a)]; }

HouseContext::HouseContext(const Catalog& cat, const House& h)
    : catalog(&cat), house(&h), grid(nav::build_navgrid(cat, h)) {
  nav_cache_.assign(h.objects.size(), -1);
  room_cells_.resize(h.rooms.size());
  std::set<int> syn;
  for (const auto& o : h.objects) syn.insert(o.synset);
  scene_synsets_.assign(syn.begin(), syn.end());
}

bool passes_size_thresholds(Vec3 dims) {
  double d[3] = {dims.x, dims.y, dims.z};
  std::sort(d, d + 3);
  if (d[1] < 0.04) return false;
  // Largest face by area; its diagonal must exceed 10 cm.
  const double faces[3][2] = {{dims.x, dims.y}, {dims.x, dims.z}, {dims.y, dims.z}};
  double best_area = -1.0, best_diag2 = 0.0;
  for (const auto& f : faces) {
    const double area = f[0] * f[1];
    if (area > best_area) {
      best_area = area;
      best_diag2 = f[0] * f[0] + f[1] * f[1];
    }
  }
  return best_diag2 > 0.10 * 0.10;
}

bool HouseContext::navigation_filter(const ObjectInstance& obj) const {
  int8_t& memo = nav_cache_[obj.id];
  if (memo >= 0) return memo == 1;
  bool ok = obj.top() <= 1.1 && passes_size_thresholds(obj.dims) &&
            nav::has_interactable_cell(grid, *house, obj);
  memo = ok ? 1 : 0;
  return ok;
}

bool HouseContext::manipulation_filter(const ObjectInstance& obj) const {
  if (!obj.pickupable) return false;
  const double maxdim = std::max({obj.dims.x, obj.dims.y, obj.dims.z});
  if (maxdim >= 0.50) return false;
  return navigation_filter(obj);
}

const std::vector<int>& HouseContext::room_free_cells(int room_id) const {
  auto& cells = room_cells_.at(room_id);
  if (!cells.empty()) return cells;
  const Rect& r = house->rooms[room_id].rect;
  for (int idx = 0; idx < static_cast<int>(grid.blocked.size()); ++idx) {
    if (!grid.in_main(idx)) continue;
    const Vec2 c = grid.center(idx);
    // Stay off the walls so a spawned agent does not start in contact.
    if (c.x < r.lo.x + sim::kAgentRadius || c.x > r.hi.x - sim::kAgentRadius ||
        c.y < r.lo.y + sim::kAgentRadius || c.y > r.hi.y - sim::kAgentRadius)
      continue;
    cells.push_back(idx);
  }
  return cells;
}

std::vector<int> anchor_objects(const HouseContext& ctx, const Room& room) {
  std::vector<int> out;
  for (const char* name : kAnchorSynsets) {
    const int syn = ctx.catalog->taxonomy.find(name);
    if (syn < 0) continue;
    int found = -1;
    int count = 0;
    for (const auto& o : ctx.house->objects) {
      if (o.room == room.id && o.synset == syn) {
        ++count;
        found = o.id;
      }
    }
    if (count == 1) out.push_back(found);
  }
  return out;
}

namespace {

std::optional<sim::AgentState> random_spawn(const HouseContext& ctx, Rng& rng) {
  const auto& rooms = ctx.house->rooms;
  for (int tries = 0; tries < 16; ++tries) {
    const int room = rng.uniform_index(rooms.size());
    const auto& cells = ctx.room_free_cells(room);
    if (cells.empty()) continue;
    const int cell = cells[rng.uniform_index(cells.size())];
    sim::AgentState s;
    const Vec2 p = ctx.grid.center(cell);
    s.pose = {p.x, p.y, 6.0 * rng.uniform_index(60)};
    return s;
  }
  return std::nullopt;
}

// Weighted draw over `candidates` with weight 1/(1+count); bumps the counter
// of the drawn entry.
int draw_balanced(const std::vector<int>& candidates, std::vector<int>& counters,
                  Rng& rng) {
  std::vector<double> w;
  w.reserve(candidates.size());
  for (int c : candidates) w.push_back(1.0 / (1.0 + counters[c]));
  const int pick = candidates[rng.weighted_index(w)];
  ++counters[pick];
  return pick;
}

std::vector<int> filtered_referable(const HouseContext& ctx, int synset, bool manip) {
  std::vector<int> out;
  for (int id : worldgen::referable_objects(*ctx.catalog, *ctx.house, synset)) {
    const auto& o = ctx.house->objects[id];
    if (manip ? ctx.manipulation_filter(o) : ctx.navigation_filter(o)) out.push_back(id);
  }
  return out;
}

std::vector<int> restricted_scene_synsets(const HouseContext& ctx,
                                          const SamplerOptions& opts) {
  if (opts.target_synsets.empty()) return ctx.scene_synsets();
  std::vector<int> out;
  for (int s : ctx.scene_synsets())
    if (std::find(opts.target_synsets.begin(), opts.target_synsets.end(), s) !=
        opts.target_synsets.end())
      out.push_back(s);
  return out;
}

bool try_object_nav(const HouseContext& ctx, SamplerCounters& counters, Rng& rng,
                    const SamplerOptions& opts, bool manip, TaskSpec& spec) {
  const auto candidates = restricted_scene_synsets(ctx, opts);
  if (candidates.empty()) return false;
  const int syn = draw_balanced(candidates, counters.synset, rng);
  auto valid = filtered_referable(ctx, syn, manip);
  if (valid.empty()) return false;
  spec.target_synset = syn;
  spec.valid_target_ids = std::move(valid);
  return true;
}

bool try_object_nav_room(const HouseContext& ctx, SamplerCounters& counters,
                         Rng& rng, const SamplerOptions& opts, TaskSpec& spec) {
  const auto candidates = restricted_scene_synsets(ctx, opts);
  if (candidates.empty()) return false;
  const int syn = draw_balanced(candidates, counters.synset, rng);
  const auto instances = worldgen::referable_objects(*ctx.catalog, *ctx.house, syn);
  if (instances.size() < 2) return false;

  // Feasible room types: every instance inside that type sits in one room,
  // and the synset also occurs in a room of a different type.
  struct Option {
    int type;
    int room;
  };
  std::vector<Option> feasible;
  for (int t = 0; t < worldgen::kNumRoomTypes; ++t) {
    int room = -1;
    bool single = true, any = false, outside = false;
    for (int id : instances) {
      const auto& o = ctx.house->objects[id];
      const RoomType rt = ctx.house->rooms[o.room].type;
      if (static_cast<int>(rt) == t) {
        any = true;
        if (room < 0) room = o.room;
        else if (room != o.room) single = false;
      } else {
        outside = true;
      }
    }
    if (any && single && outside) feasible.push_back({t, room});
  }
  if (feasible.empty()) return false;
  const Option pick = feasible[rng.uniform_index(feasible.size())];
  std::vector<int> valid;
  for (int id : instances) {
    const auto& o = ctx.house->objects[id];
    if (o.room == pick.room && ctx.navigation_filter(o)) valid.push_back(id);
  }
  if (valid.empty()) return false;
  spec.target_synset = syn;
  spec.room_type = pick.type;
  spec.target_room = pick.room;
  spec.valid_target_ids = std::move(valid);
  return true;
}

bool accept_rel_attribute(const HouseContext& ctx, RelAttribute attr,
                          const std::vector<int>& in_room, Rng& rng,
                          TaskSpec& spec) {
  const auto& objs = ctx.house->objects;
  switch (attr) {
    case RelAttribute::Smallest:
    case RelAttribute::Largest: {
      std::vector<std::pair<double, int>> by_diag;
      for (int id : in_room) by_diag.emplace_back(objs[id].diagonal(), id);
      std::sort(by_diag.begin(), by_diag.end());
      if (attr == RelAttribute::Smallest) {
        if (by_diag[0].first > 0.5 * by_diag[1].first) return false;
        spec.valid_target_ids = {by_diag[0].second};
      } else {
        const auto& top = by_diag[by_diag.size() - 1];
        const auto& second = by_diag[by_diag.size() - 2];
        if (top.first < 2.0 * second.first) return false;
        spec.valid_target_ids = {top.second};
      }
      return ctx.navigation_filter(objs[spec.valid_target_ids[0]]);
    }
    case RelAttribute::Highest: {
      std::vector<std::pair<double, int>> by_bottom;
      for (int id : in_room) by_bottom.emplace_back(objs[id].bottom(), id);
      std::sort(by_bottom.begin(), by_bottom.end(), std::greater<>());
      const auto& h = objs[by_bottom[0].second];
      const auto& s = objs[by_bottom[1].second];
      if (!(h.bottom() > s.bottom())) return false;
      if (!(s.top() < 0.5 * (h.bottom() + h.top()))) return false;
      spec.valid_target_ids = {h.id};
      return ctx.navigation_filter(h);
    }
    case RelAttribute::Lowest: {
      std::vector<std::pair<double, int>> by_top;
      for (int id : in_room) by_top.emplace_back(objs[id].top(), id);
      std::sort(by_top.begin(), by_top.end());
      const auto& l = objs[by_top[0].second];
      const auto& s = objs[by_top[1].second];
      if (!(l.top() < s.top())) return false;
      if (!(s.bottom() > 0.5 * (l.bottom() + l.top()))) return false;
      spec.valid_target_ids = {l.id};
      return ctx.navigation_filter(l);
    }
    case RelAttribute::NearestTo:
    case RelAttribute::FurthestFrom: {
      const auto anchors = anchor_objects(ctx, ctx.house->rooms[spec.target_room]);
      if (anchors.empty()) return false;
      const int anchor = anchors[rng.uniform_index(anchors.size())];
      const auto& a = objs[anchor];
      std::vector<std::pair<double, int>> by_dist;
      for (int id : in_room) {
        if (id == anchor) continue;
        by_dist.emplace_back(
            box_box_distance(objs[id].position, objs[id].dims, a.position, a.dims), id);
      }
      if (by_dist.size() < 2) return false;
      std::sort(by_dist.begin(), by_dist.end());
      int target;
      if (attr == RelAttribute::NearestTo) {
        if (!(by_dist[0].first < 0.7 * by_dist[1].first)) return false;
        target = by_dist[0].second;
      } else {
        const auto& far1 = by_dist[by_dist.size() - 1];
        const auto& far2 = by_dist[by_dist.size() - 2];
        if (!(far2.first < 0.7 * far1.first)) return false;
        target = far1.second;
      }
      spec.anchor_object = anchor;
      spec.valid_target_ids = {target};
      return ctx.navigation_filter(objs[target]) && ctx.navigation_filter(a);
    }
  }
  return false;
}

bool try_rel_attribute(const HouseContext& ctx, SamplerCounters& counters, Rng& rng,
                       const SamplerOptions& opts, TaskSpec& spec) {
  const auto candidates = restricted_scene_synsets(ctx, opts);
  if (candidates.empty()) return false;
  const int syn = draw_balanced(candidates, counters.synset, rng);
  // Rooms where the synset occurs at least twice.
  std::vector<std::vector<int>> per_room(ctx.house->rooms.size());
  for (int id : worldgen::referable_objects(*ctx.catalog, *ctx.house, syn))
    per_room[ctx.house->objects[id].room].push_back(id);
  std::vector<int> rooms;
  for (size_t r = 0; r < per_room.size(); ++r)
    if (per_room[r].size() >= 2) rooms.push_back(static_cast<int>(r));
  if (rooms.empty()) return false;
  const int room = rooms[rng.uniform_index(rooms.size())];

  // Attributes in ascending counter order, random among ties.
  std::vector<int> order(kNumRelAttributes);
  for (int i = 0; i < kNumRelAttributes; ++i) order[i] = i;
  rng.shuffle(order);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return counters.attribute[a] < counters.attribute[b];
  });
  spec.target_synset = syn;
  spec.room_type = static_cast<int>(ctx.house->rooms[room].type);
  spec.target_room = room;
  for (int ai : order) {
    const auto attr = static_cast<RelAttribute>(ai);
    TaskSpec trial = spec;
    if (accept_rel_attribute(ctx, attr, per_room[room], rng, trial)) {
      trial.has_attribute = true;
      trial.attribute = attr;
      ++counters.attribute[ai];
      spec = trial;
      return true;
    }
  }
  return false;
}

bool try_affordance(const HouseContext& ctx, SamplerCounters& counters, Rng& rng,
                    const SamplerOptions& opts, TaskSpec& spec) {
  const auto& tax = ctx.catalog->taxonomy;
  std::set<int> hyp_set;
  for (int s : restricted_scene_synsets(ctx, opts))
    for (int h : tax.proper_ancestors(s)) hyp_set.insert(h);
  if (hyp_set.empty()) return false;
  const std::vector<int> hyps(hyp_set.begin(), hyp_set.end());
  const int hyp = draw_balanced(hyps, counters.synset, rng);

  // Confident affordances of in-scene descendants, with their providers.
  std::map<std::string, std::vector<int>> providers;
  for (const auto& o : ctx.house->objects) {
    if (!tax.is_ancestor_or_self(hyp, o.synset)) continue;
    for (const auto& aff : tax.at(o.synset).affordances)
      if (aff.confidence >= 6) providers[aff.description].push_back(o.id);
  }
  if (providers.empty()) return false;
  std::vector<const std::string*> keys;
  for (const auto& [k, v] : providers) keys.push_back(&k);
  const std::string& aff = *keys[rng.uniform_index(keys.size())];
  std::vector<int> valid;
  for (int id : providers[aff])
    if (ctx.navigation_filter(ctx.house->objects[id])) valid.push_back(id);
  if (valid.empty()) return false;
  spec.target_synset = hyp;
  spec.affordance = aff;
  spec.valid_target_ids = std::move(valid);
  return true;
}

bool synset_in(const Catalog& cat, int syn, const char* const* names, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    const int id = cat.taxonomy.find(names[i]);
    if (id >= 0 && id == syn) return true;
  }
  return false;
}

bool try_local_ref(const HouseContext& ctx, SamplerCounters& counters, Rng& rng,
                   const SamplerOptions& opts, TaskSpec& spec) {
  const auto candidates = restricted_scene_synsets(ctx, opts);
  if (candidates.empty()) return false;
  const int syn = draw_balanced(candidates, counters.synset, rng);
  const auto& objs = ctx.house->objects;
  std::vector<int> instances;
  for (const auto& o : objs)
    if (o.synset == syn) instances.push_back(o.id);
  if (instances.size() < 2) return false;

  const bool near_mode = rng.chance(0.5);
  if (near_mode) {
    // Synset pairs found near each target instance within 50 cm.
    struct Triplet {
      int target, ref_a, ref_b;
    };
    std::map<std::pair<int, int>, std::vector<Triplet>> near_triplets;  // by synset pair
    std::map<std::pair<int, int>, int> loose_count;                     // within 2 m
    for (int tid : instances) {
      const auto& t = objs[tid];
      std::map<int, int> near_ref, loose_ref;  // synset -> nearest instance
      std::map<int, double> near_d, loose_d;
      for (const auto& o : objs) {
        if (o.id == tid || o.synset == syn) continue;
        if (synset_in(*ctx.catalog, o.synset, kNearExcluded,
                      std::size(kNearExcluded)))
          continue;
        const double d = box_box_distance(t.position, t.dims, o.position, o.dims);
        if (d < kLocalRefAmbiguity &&
            (!loose_d.count(o.synset) || d < loose_d[o.synset])) {
          loose_d[o.synset] = d;
          loose_ref[o.synset] = o.id;
        }
        if (d < kLocalRefNear && (!near_d.count(o.synset) || d < near_d[o.synset])) {
          near_d[o.synset] = d;
          near_ref[o.synset] = o.id;
        }
      }
      auto pair_key = [](int a, int b) {
        return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
      };
      for (auto ia = near_ref.begin(); ia != near_ref.end(); ++ia)
        for (auto ib = std::next(ia); ib != near_ref.end(); ++ib)
          near_triplets[pair_key(ia->first, ib->first)].push_back(
              {tid, ia->second, ib->second});
      for (auto ia = loose_ref.begin(); ia != loose_ref.end(); ++ia)
        for (auto ib = std::next(ia); ib != loose_ref.end(); ++ib)
          ++loose_count[pair_key(ia->first, ib->first)];
    }
    std::vector<Triplet> qualifying;
    for (const auto& [key, list] : near_triplets) {
      if (list.size() != 1) continue;            // unique tight triplet
      if (loose_count[key] != 1) continue;       // no 2 m ambiguity elsewhere
      const auto& t = list[0];
      if (!ctx.navigation_filter(objs[t.target]) ||
          !ctx.navigation_filter(objs[t.ref_a]) ||
          !ctx.navigation_filter(objs[t.ref_b]))
        continue;
      qualifying.push_back(t);
    }
    if (qualifying.empty()) return false;
    const auto& pick = qualifying[rng.uniform_index(qualifying.size())];
    spec.target_synset = syn;
    spec.local_mode = 0;
    spec.ref_synset_a = objs[pick.ref_a].synset;
    spec.ref_synset_b = objs[pick.ref_b].synset;
    spec.valid_target_ids = {pick.target};
    return true;
  }

  // "on" mode: unique (target synset, supporter synset) combination.
  std::map<int, std::vector<std::pair<int, int>>> by_supporter_syn;
  for (int tid : instances) {
    const auto& t = objs[tid];
    if (t.on_top_of < 0) continue;
    const auto& sup = objs[t.on_top_of];
    if (synset_in(*ctx.catalog, sup.synset, kOnExcluded, std::size(kOnExcluded)))
      continue;
    by_supporter_syn[sup.synset].push_back({tid, sup.id});
  }
  std::vector<std::pair<int, int>> qualifying;  // (target, supporter)
  for (const auto& [sup_syn, list] : by_supporter_syn) {
    if (list.size() != 1) continue;
    const auto& [tid, sid] = list[0];
    if (!ctx.navigation_filter(objs[tid]) || !ctx.navigation_filter(objs[sid]))
      continue;
    qualifying.push_back(list[0]);
  }
  if (qualifying.empty()) return false;
  const auto& [tid, sid] = qualifying[rng.uniform_index(qualifying.size())];
  spec.target_synset = syn;
  spec.local_mode = 1;
  spec.ref_synset_a = objs[sid].synset;
  spec.valid_target_ids = {tid};
  return true;
}

bool try_open_vocab(const HouseContext& ctx, SamplerCounters& counters, Rng& rng,
                    const SamplerOptions& opts, TaskSpec& spec) {
  const auto candidates = restricted_scene_synsets(ctx, opts);
  if (candidates.empty()) return false;
  const int syn = draw_balanced(candidates, counters.synset, rng);
  std::map<int, std::vector<int>> by_asset;
  for (const auto& o : ctx.house->objects)
    if (o.synset == syn) by_asset[o.asset].push_back(o.id);
  std::vector<std::pair<int, int>> singles;  // (asset, instance)
  for (const auto& [asset, ids] : by_asset) {
    if (ids.size() != 1) continue;
    if (ctx.catalog->assets[asset].description.empty()) continue;
    if (!ctx.navigation_filter(ctx.house->objects[ids[0]])) continue;
    singles.push_back({asset, ids[0]});
  }
  if (singles.empty()) return false;
  const auto& [asset, id] = singles[rng.uniform_index(singles.size())];
  spec.target_synset = syn;
  spec.target_asset = asset;
  spec.description = ctx.catalog->assets[asset].description;
  spec.valid_target_ids = {id};
  return true;
}

bool try_room_nav(const HouseContext& ctx, SamplerCounters& counters, Rng& rng,
                  TaskSpec& spec) {
  std::vector<int> types;
  for (int t = 0; t < worldgen::kNumRoomTypes; ++t)
    for (const auto& r : ctx.house->rooms)
      if (static_cast<int>(r.type) == t) {
        types.push_back(t);
        break;
      }
  if (types.empty()) return false;
  spec.room_type = draw_balanced(types, counters.room_type, rng);
  return true;
}

// Interactable spawn for PickUp: a pose from which some valid target is at
// grasp reach with the manipulation camera aligned.
bool pickup_spawn(const HouseContext& ctx, Rng& rng, TaskSpec& spec) {
  struct Site {
    int cell;
    double theta;
  };
  std::vector<Site> sites;
  for (int id : spec.valid_target_ids) {
    for (const auto& ic :
         nav::interactable_cells(ctx.grid, *ctx.house, ctx.house->objects[id]))
      sites.push_back({ic.cell, ic.sol.theta});
  }
  if (sites.empty()) return false;
  const auto& s = sites[rng.uniform_index(sites.size())];
  const Vec2 p = ctx.grid.center(s.cell);
  spec.spawn = sim::AgentState{};
  spec.spawn.pose = {p.x, p.y, s.theta};
  return true;
}

}  // namespace

std::optional<TaskSpec> sample_task(TaskKind kind, const HouseContext& ctx,
                                    SamplerCounters& counters, Rng& rng) {
  return sample_task(kind, ctx, counters, rng, {});
}

std::optional<TaskSpec> sample_task(TaskKind kind, const HouseContext& ctx,
                                    SamplerCounters& counters, Rng& rng,
                                    const SamplerOptions& opts) {
  for (int attempt = 0; attempt < kSampleBudget; ++attempt) {
    TaskSpec spec;
    spec.kind = kind;
    spec.house_seed = ctx.house->seed;
    bool ok = false;
    switch (kind) {
      case TaskKind::ObjectNav: ok = try_object_nav(ctx, counters, rng, opts, false, spec); break;
      case TaskKind::PickUp:
      case TaskKind::Fetch: ok = try_object_nav(ctx, counters, rng, opts, true, spec); break;
      case TaskKind::RoomVisit: ok = true; break;
      case TaskKind::ObjectNavRoom: ok = try_object_nav_room(ctx, counters, rng, opts, spec); break;
      case TaskKind::ObjectNavRelAttribute: ok = try_rel_attribute(ctx, counters, rng, opts, spec); break;
      case TaskKind::ObjectNavAffordance: ok = try_affordance(ctx, counters, rng, opts, spec); break;
      case TaskKind::ObjectNavLocalRef: ok = try_local_ref(ctx, counters, rng, opts, spec); break;
      case TaskKind::ObjectNavOpenVocab: ok = try_open_vocab(ctx, counters, rng, opts, spec); break;
      case TaskKind::RoomNav: ok = try_room_nav(ctx, counters, rng, spec); break;
    }
    if (!ok) continue;
    if (kind == TaskKind::PickUp) {
      if (!pickup_spawn(ctx, rng, spec)) continue;
    } else {
      auto spawn = random_spawn(ctx, rng);
      if (!spawn) return std::nullopt;
      spec.spawn = *spawn;
    }
    spec.instruction = instruction_text(*ctx.catalog, *ctx.house, spec, rng);
    return spec;
  }
  return std::nullopt;
}

std::string instruction_text(const Catalog& catalog, const House& house,
                             const TaskSpec& spec, Rng& rng) {
  static const char* kVerbs[3] = {"find", "locate", "search for"};
  const std::string verb = kVerbs[rng.uniform_index(3)];
  const auto& tax = catalog.taxonomy;
  auto lemma = [&](int syn) { return tax.primary_lemma(syn); };
  auto room_lemma = [](int type) {
    switch (static_cast<RoomType>(type)) {
      case RoomType::Kitchen: return "kitchen";
      case RoomType::Bathroom: return "bathroom";
      case RoomType::LivingRoom: return "living room";
      case RoomType::Bedroom: return "bedroom";
    }
    return "room";
  };
  switch (spec.kind) {
    case TaskKind::ObjectNav:
      return verb + " a " + lemma(spec.target_synset);
    case TaskKind::PickUp:
      return "pick up a " + lemma(spec.target_synset);
    case TaskKind::Fetch: {
      const std::string l = lemma(spec.target_synset);
      return "locate a " + l + " and pick up that " + l;
    }
    case TaskKind::RoomVisit:
      return "Visit every room in this " + std::to_string(house.rooms.size()) +
             "-room house. Indicate when you have seen a new room and when you are done.";
    case TaskKind::ObjectNavRoom:
      return verb + " a " + lemma(spec.target_synset) + " in the " +
             room_lemma(spec.room_type);
    case TaskKind::ObjectNavRelAttribute: {
      const std::string room = room_lemma(spec.room_type);
      const std::string l = lemma(spec.target_synset);
      switch (spec.attribute) {
        case RelAttribute::Smallest:
          return verb + " the smallest " + l + " in the " + room;
        case RelAttribute::Largest:
          return verb + " the largest " + l + " in the " + room;
        case RelAttribute::Highest:
          return verb + " the highest " + l + " in the " + room;
        case RelAttribute::Lowest:
          return verb + " the lowest " + l + " in the " + room;
        case RelAttribute::NearestTo:
          return verb + " the " + l + " nearest to the " +
                 lemma(house.objects[spec.anchor_object].synset) + " in the " + room;
        case RelAttribute::FurthestFrom:
          return verb + " the " + l + " furthest from the " +
                 lemma(house.objects[spec.anchor_object].synset) + " in the " + room;
      }
      return verb + " the " + l;
    }
    case TaskKind::ObjectNavAffordance: {
      std::string aff = spec.affordance;
      if (!aff.empty()) aff[0] = static_cast<char>(std::tolower(aff[0]));
      return verb + " a " + lemma(spec.target_synset) + " that can best be used for " + aff;
    }
    case TaskKind::ObjectNavLocalRef:
      if (spec.local_mode == 0)
        return verb + " a " + lemma(spec.target_synset) + " near a " +
               lemma(spec.ref_synset_a) + " and a " + lemma(spec.ref_synset_b);
      return verb + " a " + lemma(spec.target_synset) + " on a " + lemma(spec.ref_synset_a);
    case TaskKind::ObjectNavOpenVocab:
      return verb + " " + spec.description;
    case TaskKind::RoomNav:
      return verb + " a " + room_lemma(spec.room_type);
  }
  return verb;
}

std::string task_to_json(const Catalog& catalog, const TaskSpec& spec) {
  json j;
  j["kind"] = task_kind_name(spec.kind);
  j["house_seed"] = spec.house_seed;
  j["spawn"] = {spec.spawn.pose.x, spec.spawn.pose.y, spec.spawn.pose.theta};
  j["instruction"] = spec.instruction;
  if (spec.target_synset >= 0)
    j["target_synset"] = catalog.taxonomy.at(spec.target_synset).id;
  if (spec.room_type >= 0)
    j["room_type"] = worldgen::room_type_name(static_cast<RoomType>(spec.room_type));
  if (spec.target_room >= 0) j["target_room"] = spec.target_room;
  if (spec.has_attribute) j["attribute"] = rel_attribute_name(spec.attribute);
  if (spec.anchor_object >= 0) j["anchor_object"] = spec.anchor_object;
  if (!spec.affordance.empty()) j["affordance"] = spec.affordance;
  if (spec.local_mode >= 0) {
    j["local_mode"] = spec.local_mode == 0 ? "near" : "on";
    j["ref_synset_a"] = catalog.taxonomy.at(spec.ref_synset_a).id;
    if (spec.ref_synset_b >= 0)
      j["ref_synset_b"] = catalog.taxonomy.at(spec.ref_synset_b).id;
  }
  if (spec.target_asset >= 0) j["target_asset"] = catalog.assets[spec.target_asset].id;
  if (!spec.description.empty()) j["description"] = spec.description;
  j["valid_target_ids"] = spec.valid_target_ids;
  return j.dump();
}

TaskSpec task_from_json(const Catalog& catalog, const std::string& text) {
  const json j = json::parse(text);
  TaskSpec spec;
  spec.kind = task_kind_from_name(j.at("kind").get<std::string>());
  spec.house_seed = j.at("house_seed").get<uint64_t>();
  spec.spawn.pose = {j.at("spawn").at(0).get<double>(), j.at("spawn").at(1).get<double>(),
                     j.at("spawn").at(2).get<double>()};
  spec.instruction = j.at("instruction").get<std::string>();
  if (j.contains("target_synset"))
    spec.target_synset = catalog.taxonomy.index_of(j.at("target_synset").get<std::string>());
  if (j.contains("room_type"))
    spec.room_type = static_cast<int>(
        worldgen::room_type_from_name(j.at("room_type").get<std::string>()));
  spec.target_room = j.value("target_room", -1);
  if (j.contains("attribute")) {
    spec.has_attribute = true;
    const std::string a = j.at("attribute").get<std::string>();
    for (int i = 0; i < kNumRelAttributes; ++i)
      if (a == kAttrNames[i]) spec.attribute = static_cast<RelAttribute>(i);
  }
  spec.anchor_object = j.value("anchor_object", -1);
  spec.affordance = j.value("affordance", "");
  if (j.contains("local_mode")) {
    spec.local_mode = j.at("local_mode").get<std::string>() == "near" ? 0 : 1;
    spec.ref_synset_a = catalog.taxonomy.index_of(j.at("ref_synset_a").get<std::string>());
    if (j.contains("ref_synset_b"))
      spec.ref_synset_b = catalog.taxonomy.index_of(j.at("ref_synset_b").get<std::string>());
  }
  if (j.contains("target_asset"))
    spec.target_asset = catalog.asset_index(j.at("target_asset").get<std::string>());
  spec.description = j.value("description", "");
  spec.valid_target_ids = j.at("valid_target_ids").get<std::vector<int>>();
  return spec;
}

}  // namespace domus::taskgen
