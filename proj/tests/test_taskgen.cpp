#include <doctest.h>

#include <map>
#include <set>

#include "domus/taskgen.hpp"

using namespace domus;
using namespace domus::taskgen;
using worldgen::builtin_catalog;
using worldgen::Catalog;
using worldgen::House;

namespace {

House synthetic_house(const Catalog& cat) {
  // One 10x10 kitchen, open floor.
  House h;
  h.seed = 0;
  h.layout_name = "test";
  h.footprint = {{0, 0}, {10, 10}};
  worldgen::Room r;
  r.id = 0;
  r.type = worldgen::RoomType::Kitchen;
  r.rect = h.footprint;
  h.rooms.push_back(r);
  (void)cat;
  return h;
}

int add_box(House& h, const Catalog& cat, const std::string& asset, Vec3 pos,
            Vec3 dims, int on_top_of = -1) {
  const int ai = cat.asset_index(asset);
  worldgen::ObjectInstance o;
  o.id = static_cast<int>(h.objects.size());
  o.asset = ai;
  o.synset = cat.assets[ai].synset;
  o.position = pos;
  o.dims = dims;
  o.room = h.room_at({pos.x, pos.y});
  o.on_top_of = on_top_of;
  o.pickupable = cat.assets[ai].pickupable;
  h.objects.push_back(o);
  return o.id;
}

}  // namespace

TEST_CASE("size threshold arithmetic from hand-constructed boxes") {
  // (0.12, 0.06, 0.09): largest face (0.12 x 0.09), diag 0.15 > 0.10; middle 0.09.
  CHECK(passes_size_thresholds({0.12, 0.06, 0.09}));
  // (0.05, 0.03, 0.02): largest face diag ~0.058 < 0.10.
  CHECK(!passes_size_thresholds({0.05, 0.03, 0.02}));
  // Middle dimension below 4 cm fails.
  CHECK(!passes_size_thresholds({0.22, 0.03, 0.015}));
  // Exactly 4 cm middle passes (at-least rule).
  CHECK(passes_size_thresholds({0.20, 0.04, 0.20}));
}

TEST_CASE("navigation filter: height, size, reachability") {
  const Catalog& cat = builtin_catalog();
  House h = synthetic_house(cat);
  const int ok = add_box(h, cat, "basketball", {5, 5, 0.12}, {0.24, 0.24, 0.24});
  // Top above 1.1 m fails even with a big box.
  const int high = add_box(h, cat, "basketball", {3, 3, 1.08}, {0.24, 0.24, 0.24});
  HouseContext ctx(cat, h);
  CHECK(ctx.navigation_filter(h.objects[ok]));
  CHECK(h.objects[high].top() > 1.1);
  CHECK(!ctx.navigation_filter(h.objects[high]));
}

TEST_CASE("manipulation filter: pickupable and under 50 cm") {
  const Catalog& cat = builtin_catalog();
  House h = synthetic_house(cat);
  const int small = add_box(h, cat, "basketball", {5, 5, 0.12}, {0.24, 0.24, 0.24});
  const int big = add_box(h, cat, "basketball", {3, 3, 0.3}, {0.60, 0.24, 0.24});
  const int nopick = add_box(h, cat, "trash_can", {7, 7, 0.2}, {0.30, 0.30, 0.40});
  HouseContext ctx(cat, h);
  CHECK(ctx.manipulation_filter(h.objects[small]));
  CHECK(!ctx.manipulation_filter(h.objects[big]));    // max dim 0.60 >= 0.50
  CHECK(!ctx.manipulation_filter(h.objects[nopick])); // not pickupable
  CHECK(ctx.navigation_filter(h.objects[nopick]));    // but navigable target
}

TEST_CASE("anchor objects require uniqueness within the room") {
  const Catalog& cat = builtin_catalog();
  House h = synthetic_house(cat);
  const int sofa = add_box(h, cat, "sofa", {2, 2, 0.225}, {2.0, 0.9, 0.45});
  add_box(h, cat, "sink_kitchen", {8, 2, 0.45}, {0.6, 0.55, 0.9});
  add_box(h, cat, "sink_kitchen", {8, 5, 0.45}, {0.6, 0.55, 0.9});
  HouseContext ctx(cat, h);
  const auto anchors = anchor_objects(ctx, h.rooms[0]);
  CHECK(std::find(anchors.begin(), anchors.end(), sofa) != anchors.end());
  // Two sinks: excluded.
  for (int id : anchors) CHECK(h.objects[id].synset != cat.taxonomy.index_of("sink.n.01"));
  House empty = synthetic_house(cat);
  HouseContext ctx2(cat, empty);
  CHECK(anchor_objects(ctx2, empty.rooms[0]).empty());
}

TEST_CASE("rel-attribute acceptance rules") {
  const Catalog& cat = builtin_catalog();
  SamplerOptions opts;
  opts.target_synsets = {cat.taxonomy.index_of("vase.n.01")};

  SUBCASE("smallest accepted at half the second smallest diagonal") {
    House h = synthetic_house(cat);
    // diag 0.156 vs 0.362: 0.156 <= 0.5 * 0.362 -> accept.
    const int tiny = add_box(h, cat, "vase_tiny", {4, 4, 0.06}, {0.07, 0.07, 0.12});
    add_box(h, cat, "vase_medium", {6, 6, 0.15}, {0.14, 0.14, 0.30});
    HouseContext ctx(cat, h);
    SamplerCounters counters(cat);
    Rng rng(1);
    bool found_smallest = false;
    for (int i = 0; i < 40 && !found_smallest; ++i) {
      auto spec = sample_task(TaskKind::ObjectNavRelAttribute, ctx, counters, rng, opts);
      REQUIRE(spec.has_value());
      if (spec->attribute == RelAttribute::Smallest) {
        CHECK(spec->valid_target_ids == std::vector<int>{tiny});
        found_smallest = true;
      }
    }
    CHECK(found_smallest);
  }
  SUBCASE("similar sizes reject smallest and largest") {
    House h = synthetic_house(cat);
    add_box(h, cat, "vase_medium", {4, 4, 0.15}, {0.14, 0.14, 0.30});
    add_box(h, cat, "vase_medium", {6, 6, 0.15}, {0.14, 0.14, 0.30});
    HouseContext ctx(cat, h);
    SamplerCounters counters(cat);
    Rng rng(2);
    for (int i = 0; i < 30; ++i) {
      auto spec = sample_task(TaskKind::ObjectNavRelAttribute, ctx, counters, rng, opts);
      if (!spec) continue;
      CHECK(spec->attribute != RelAttribute::Smallest);
      CHECK(spec->attribute != RelAttribute::Largest);
      // highest/lowest need separated height bands; identical boxes fail too.
      CHECK(spec->attribute != RelAttribute::Highest);
      CHECK(spec->attribute != RelAttribute::Lowest);
    }
  }
  SUBCASE("furthest-from 70% rule") {
    House h = synthetic_house(cat);
    add_box(h, cat, "sofa", {5.0, 8.0, 0.225}, {2.0, 0.9, 0.45});  // anchor
    // Distances from anchor approx 2.0 and 1.5: reject (1.5 >= 0.7*2.0).
    add_box(h, cat, "vase_tiny", {5.0, 5.55, 0.06}, {0.07, 0.07, 0.12});
    add_box(h, cat, "vase_medium", {5.0, 6.05, 0.15}, {0.14, 0.14, 0.30});
    HouseContext ctx(cat, h);
    SamplerCounters counters(cat);
    Rng rng(3);
    for (int i = 0; i < 30; ++i) {
      auto spec = sample_task(TaskKind::ObjectNavRelAttribute, ctx, counters, rng, opts);
      if (!spec) continue;
      CHECK(spec->attribute != RelAttribute::FurthestFrom);
    }
  }
  SUBCASE("highest halfway rule") {
    House h = synthetic_house(cat);
    // Highest box spans [0.8, 1.0]; second-highest top at 0.85 < 0.9 halfway.
    const int table = add_box(h, cat, "dining_table", {4, 4, 0.40}, {1.4, 0.9, 0.80});
    const int hi = add_box(h, cat, "vase_tiny", {4, 4, 0.90}, {0.07, 0.07, 0.20}, table);
    const int low_table = add_box(h, cat, "coffee_table", {7, 7, 0.325}, {1.0, 0.6, 0.65});
    add_box(h, cat, "vase_tiny", {7, 7, 0.75}, {0.07, 0.07, 0.20}, low_table);
    HouseContext ctx(cat, h);
    SamplerCounters counters(cat);
    Rng rng(4);
    bool found = false;
    for (int i = 0; i < 60 && !found; ++i) {
      auto spec = sample_task(TaskKind::ObjectNavRelAttribute, ctx, counters, rng, opts);
      if (spec && spec->attribute == RelAttribute::Highest) {
        CHECK(spec->valid_target_ids == std::vector<int>{hi});
        found = true;
      }
    }
    CHECK(found);
  }
}

TEST_CASE("instruction templates") {
  const Catalog& cat = builtin_catalog();
  House h = worldgen::generate_house(cat, 9001);
  Rng rng(0);

  TaskSpec fetch;
  fetch.kind = TaskKind::Fetch;
  fetch.target_synset = cat.taxonomy.index_of("mug.n.04");
  CHECK(instruction_text(cat, h, fetch, rng) == "locate a mug and pick up that mug");

  TaskSpec rv;
  rv.kind = TaskKind::RoomVisit;
  const std::string text = instruction_text(cat, h, rv, rng);
  const std::string expect = "Visit every room in this " +
                             std::to_string(h.rooms.size()) +
                             "-room house. Indicate when you have seen a new room "
                             "and when you are done.";
  CHECK(text == expect);

  TaskSpec ra;
  ra.kind = TaskKind::ObjectNavRelAttribute;
  ra.target_synset = cat.taxonomy.index_of("vase.n.01");
  ra.room_type = static_cast<int>(worldgen::RoomType::Bedroom);
  ra.has_attribute = true;
  ra.attribute = RelAttribute::Smallest;
  Rng rng2(11);
  const std::string t2 = instruction_text(cat, h, ra, rng2);
  const bool ok = t2 == "find the smallest vase in the bedroom" ||
                  t2 == "locate the smallest vase in the bedroom" ||
                  t2 == "search for the smallest vase in the bedroom";
  CHECK(ok);
}

TEST_CASE("sampled specs pass their own filters and serialize round-trip") {
  const Catalog& cat = builtin_catalog();
  SamplerCounters counters(cat);
  Rng rng(77);
  int emitted = 0;
  for (uint64_t seed = 200; seed < 230; ++seed) {
    const House h = worldgen::generate_house(cat, seed);
    HouseContext ctx(cat, h);
    for (int k = 0; k < kNumTaskKinds; ++k) {
      const auto kind = static_cast<TaskKind>(k);
      auto spec = sample_task(kind, ctx, counters, rng);
      if (!spec) continue;
      ++emitted;
      // Re-applying the kind's filter on the emitted targets is idempotent.
      for (int id : spec->valid_target_ids) {
        const auto& o = h.objects[id];
        if (kind == TaskKind::PickUp || kind == TaskKind::Fetch)
          CHECK(ctx.manipulation_filter(o));
        else
          CHECK(ctx.navigation_filter(o));
      }
      if (kind != TaskKind::RoomVisit && kind != TaskKind::RoomNav)
        CHECK(!spec->valid_target_ids.empty());
      CHECK(!spec->instruction.empty());
      // Round trip through the structured-text record.
      const std::string js = task_to_json(cat, *spec);
      const TaskSpec back = task_from_json(cat, js);
      CHECK(task_to_json(cat, back) == js);

      // Kind-specific invariants.
      if (kind == TaskKind::ObjectNavRoom) {
        std::set<int> rooms_in_type;
        bool other_type = false;
        for (int id : worldgen::referable_objects(cat, h, spec->target_synset)) {
          const auto& o = h.objects[id];
          if (static_cast<int>(h.rooms[o.room].type) == spec->room_type)
            rooms_in_type.insert(o.room);
          else
            other_type = true;
        }
        CHECK(rooms_in_type.size() == 1);
        CHECK(other_type);
      }
      if (kind == TaskKind::ObjectNavRelAttribute) {
        int in_room = 0;
        for (int id : worldgen::referable_objects(cat, h, spec->target_synset))
          if (h.objects[id].room == spec->target_room) ++in_room;
        CHECK(in_room >= 2);
      }
      if (kind == TaskKind::PickUp) {
        // Spawned at an interactable pose: some valid target is reachable.
        bool reachable = false;
        for (int id : spec->valid_target_ids) {
          auto sol = nav::solve_reach(spec->spawn.pose.xy(), h.objects[id].position);
          if (sol) reachable = true;
        }
        CHECK(reachable);
      }
    }
  }
  CHECK(emitted > 120);  // most kinds sample on most houses
}

TEST_CASE("local-ref specs are unique under a rescan") {
  const Catalog& cat = builtin_catalog();
  SamplerCounters counters(cat);
  Rng rng(123);
  int checked = 0;
  for (uint64_t seed = 300; seed < 340 && checked < 8; ++seed) {
    const House h = worldgen::generate_house(cat, seed);
    HouseContext ctx(cat, h);
    auto spec = sample_task(TaskKind::ObjectNavLocalRef, ctx, counters, rng);
    if (!spec) continue;
    ++checked;
    REQUIRE(spec->valid_target_ids.size() == 1);
    const auto& target = h.objects[spec->valid_target_ids[0]];
    CHECK(target.synset == spec->target_synset);
    if (spec->local_mode == 1) {
      REQUIRE(target.on_top_of >= 0);
      CHECK(h.objects[target.on_top_of].synset == spec->ref_synset_a);
      // Unique (target synset, supporter synset) pair in the house.
      int matches = 0;
      for (const auto& o : h.objects)
        if (o.synset == spec->target_synset && o.on_top_of >= 0 &&
            h.objects[o.on_top_of].synset == spec->ref_synset_a)
          ++matches;
      CHECK(matches == 1);
    } else {
      // Exactly one instance of the target synset with both reference
      // synsets within 50 cm.
      int matches = 0;
      for (const auto& o : h.objects) {
        if (o.synset != spec->target_synset) continue;
        bool a = false, b = false;
        for (const auto& r : h.objects) {
          if (r.id == o.id) continue;
          const double d = box_box_distance(o.position, o.dims, r.position, r.dims);
          if (d < 0.5 && r.synset == spec->ref_synset_a) a = true;
          if (d < 0.5 && r.synset == spec->ref_synset_b) b = true;
        }
        if (a && b) ++matches;
      }
      CHECK(matches == 1);
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("open-vocab targets are unique described assets") {
  const Catalog& cat = builtin_catalog();
  SamplerCounters counters(cat);
  Rng rng(55);
  int checked = 0;
  for (uint64_t seed = 400; seed < 420 && checked < 10; ++seed) {
    const House h = worldgen::generate_house(cat, seed);
    HouseContext ctx(cat, h);
    auto spec = sample_task(TaskKind::ObjectNavOpenVocab, ctx, counters, rng);
    if (!spec) continue;
    ++checked;
    REQUIRE(spec->valid_target_ids.size() == 1);
    CHECK(!spec->description.empty());
    int count = 0;
    for (const auto& o : h.objects)
      if (o.asset == spec->target_asset) ++count;
    CHECK(count == 1);
  }
  CHECK(checked > 0);
}

TEST_CASE("counter balancing approaches uniformity") {
  const Catalog& cat = builtin_catalog();
  // Single fixed house, always-available synsets only.
  const House h = worldgen::generate_house(cat, 4242);
  HouseContext ctx(cat, h);
  SamplerCounters counters(cat);
  Rng rng(9);
  std::map<int, int> picked;
  const int n = 10000;
  int accepted = 0;
  for (int i = 0; i < n; ++i) {
    auto spec = sample_task(TaskKind::ObjectNav, ctx, counters, rng);
    if (!spec) continue;
    ++accepted;
    picked[spec->target_synset]++;
  }
  REQUIRE(accepted > n / 2);
  // Among synsets that always pass (picked often), max/min within 1.5x.
  std::vector<int> counts;
  for (const auto& [syn, c] : picked)
    if (c > accepted / (picked.size() * 4)) counts.push_back(c);
  REQUIRE(counts.size() >= 3);
  const auto [mn, mx] = std::minmax_element(counts.begin(), counts.end());
  CHECK(static_cast<double>(*mx) / *mn < 1.5);
}

TEST_CASE("affordances below the confidence threshold are never sampled") {
  const Catalog& cat = builtin_catalog();
  // Catalog check: low-confidence uses exist, so the filter is exercised.
  bool has_low = false;
  for (int i = 0; i < cat.taxonomy.size(); ++i)
    for (const auto& a : cat.taxonomy.at(i).affordances)
      if (a.confidence < 6) has_low = true;
  REQUIRE(has_low);
  SamplerCounters counters(cat);
  Rng rng(31);
  for (uint64_t seed = 500; seed < 515; ++seed) {
    const House h = worldgen::generate_house(cat, seed);
    HouseContext ctx(cat, h);
    for (int i = 0; i < 10; ++i) {
      auto spec = sample_task(TaskKind::ObjectNavAffordance, ctx, counters, rng);
      if (!spec) continue;
      bool confident = false;
      for (int id : spec->valid_target_ids) {
        for (const auto& a : cat.taxonomy.at(h.objects[id].synset).affordances)
          if (a.description == spec->affordance && a.confidence >= 6) confident = true;
      }
      CHECK(confident);
      // Hypernym is a proper ancestor, never the root.
      CHECK(spec->target_synset != cat.taxonomy.root());
      for (int id : spec->valid_target_ids)
        CHECK(cat.taxonomy.is_ancestor_or_self(spec->target_synset,
                                               h.objects[id].synset));
    }
  }
}
