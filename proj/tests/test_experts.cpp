#include <doctest.h>

#include <cmath>
#include <queue>

#include "domus/experts.hpp"

using namespace domus;
using namespace domus::experts;
using taskgen::HouseContext;
using taskgen::SamplerCounters;
using taskgen::TaskKind;
using taskgen::TaskSpec;
using worldgen::builtin_catalog;
using worldgen::Catalog;
using worldgen::House;

namespace {

House open_house() {
  House h;
  h.footprint = {{0, 0}, {10, 10}};
  worldgen::Room r;
  r.id = 0;
  r.type = worldgen::RoomType::LivingRoom;
  r.rect = h.footprint;
  h.rooms.push_back(r);
  return h;
}

// Plain 4/8-connected Dijkstra oracle, independent of the A* implementation.
double dijkstra_oracle(const nav::NavGrid& g, int start, int goal) {
  std::vector<double> dist(g.blocked.size(), std::numeric_limits<double>::infinity());
  using QE = std::pair<double, int>;
  std::priority_queue<QE, std::vector<QE>, std::greater<>> pq;
  dist[start] = 0;
  pq.push({0, start});
  while (!pq.empty()) {
    auto [d, idx] = pq.top();
    pq.pop();
    if (d > dist[idx]) continue;
    if (idx == goal) return d;
    const int x = idx % g.nx, y = idx / g.nx;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if ((dx == 0 && dy == 0) || !g.is_free(x + dx, y + dy)) continue;
        if (dx != 0 && dy != 0 && (!g.is_free(x + dx, y) || !g.is_free(x, y + dy)))
          continue;
        const double nd = d + nav::kCell * ((dx && dy) ? std::sqrt(2.0) : 1.0);
        const int ni = g.index(x + dx, y + dy);
        if (nd < dist[ni]) {
          dist[ni] = nd;
          pq.push({nd, ni});
        }
      }
  }
  return dist[goal];
}

TaskSpec make_object_nav(const HouseContext& ctx, int target, Vec2 spawn,
                         double theta) {
  TaskSpec t;
  t.kind = TaskKind::ObjectNav;
  t.house_seed = ctx.house->seed;
  t.spawn.pose = {spawn.x, spawn.y, theta};
  t.target_synset = ctx.house->objects[target].synset;
  t.valid_target_ids = {target};
  t.instruction = "find it";
  return t;
}

}  // namespace

TEST_CASE("plan_shortest_path basics") {
  const Catalog& cat = builtin_catalog();
  const House h = open_house();
  const auto grid = nav::build_navgrid(cat, h);

  SUBCASE("from == to gives a single waypoint of length 0") {
    const auto p = plan_shortest_path(grid, {5, 5}, {5, 5});
    REQUIRE(p.has_value());
    CHECK(p->waypoints.size() == 1);
    CHECK(p->total_length == 0.0);
  }
  SUBCASE("empty room: straight segment, Euclidean length") {
    const auto p = plan_shortest_path(grid, {2, 2}, {8, 7});
    REQUIRE(p.has_value());
    const double euclid = dist(Vec2{2, 2}, Vec2{8, 7});
    CHECK(p->total_length >= euclid - 1e-9);
    CHECK(p->total_length <= euclid + nav::kCell * std::sqrt(2.0));
    CHECK(p->waypoints.size() == 2);
  }
  SUBCASE("unreachable goal reports no path") {
    House two = open_house();
    two.rooms.clear();
    worldgen::Room a, b;
    a.id = 0; a.type = worldgen::RoomType::Kitchen; a.rect = {{0, 0}, {5, 10}};
    b.id = 1; b.type = worldgen::RoomType::Bedroom; b.rect = {{5, 0}, {10, 10}};
    two.rooms = {a, b};
    // No doors: rooms disconnected.
    const auto g2 = nav::build_navgrid(cat, two);
    CHECK(!plan_shortest_path(g2, {2, 5}, {8, 5}).has_value());
  }
}

TEST_CASE("two rooms joined by a door: path through the door, optimal length") {
  const Catalog& cat = builtin_catalog();
  House h = open_house();
  h.rooms.clear();
  worldgen::Room a, b;
  a.id = 0; a.type = worldgen::RoomType::Kitchen; a.rect = {{0, 0}, {5, 10}};
  b.id = 1; b.type = worldgen::RoomType::Bedroom; b.rect = {{5, 0}, {10, 10}};
  h.rooms = {a, b};
  h.doors.push_back({0, 1, true, 5.0, 4.0, 4.9});
  const auto grid = nav::build_navgrid(cat, h);
  const Vec2 from{2, 8}, to{8, 8};
  const auto p = plan_shortest_path(grid, from, to);
  REQUIRE(p.has_value());
  // Passes through the door interval.
  bool crossed = false;
  for (size_t i = 1; i < p->waypoints.size(); ++i) {
    const Vec2 w0 = p->waypoints[i - 1], w1 = p->waypoints[i];
    if ((w0.x - 5.0) * (w1.x - 5.0) <= 0.0) {
      const double t = (5.0 - w0.x) / (w1.x - w0.x);
      const double y = w0.y + t * (w1.y - w0.y);
      CHECK(y >= 4.0);
      CHECK(y <= 4.9);
      crossed = true;
    }
  }
  CHECK(crossed);
  const double oracle = dijkstra_oracle(grid, grid.cell_at(from), grid.cell_at(to));
  CHECK(p->total_length <= oracle + nav::kCell * std::sqrt(2.0));
}

TEST_CASE("A* length never exceeds the Dijkstra oracle on random houses") {
  const Catalog& cat = builtin_catalog();
  Rng rng(17);
  int tested = 0;
  for (uint64_t seed = 700; seed < 712; ++seed) {
    const House h = worldgen::generate_house(cat, seed);
    const auto grid = nav::build_navgrid(cat, h);
    for (int trial = 0; trial < 6; ++trial) {
      std::vector<int> free;
      for (int i = 0; i < static_cast<int>(grid.blocked.size()); ++i)
        if (grid.in_main(i)) free.push_back(i);
      REQUIRE(free.size() > 10);
      const int s = free[rng.uniform_index(free.size())];
      const int g = free[rng.uniform_index(free.size())];
      const auto p = plan_shortest_path(grid, grid.center(s), grid.center(g));
      REQUIRE(p.has_value());
      const double oracle = dijkstra_oracle(grid, s, g);
      CHECK(p->total_length <= oracle + nav::kCell * std::sqrt(2.0) + 1e-9);
      ++tested;
    }
  }
  CHECK(tested == 72);
}

TEST_CASE("expert in an open room: short, successful trajectory") {
  const Catalog& cat = builtin_catalog();
  House h = open_house();
  const int ball = cat.asset_index("basketball");
  worldgen::ObjectInstance o;
  o.id = 0;
  o.asset = ball;
  o.synset = cat.assets[ball].synset;
  o.position = {6.0, 5.0, 0.12};
  o.dims = cat.assets[ball].dims;
  o.room = 0;
  o.pickupable = true;
  h.objects.push_back(o);
  HouseContext ctx(cat, h);

  SUBCASE("target 1 m ahead: trajectory of a few steps ending in Terminate") {
    const TaskSpec t = make_object_nav(ctx, 0, Vec2{5.0, 5.0}, 0.0);
    Rng rng(3);
    const auto traj = run_expert(ctx, t, rng);
    REQUIRE(traj.has_value());
    CHECK(traj->success);
    CHECK(traj->steps.size() <= 10);
    CHECK(traj->steps.back().action == sim::Action::Terminate);
  }
  SUBCASE("goal directly behind: rotations totaling 180 degrees first") {
    const TaskSpec t = make_object_nav(ctx, 0, Vec2{8.5, 5.0}, 0.0);
    Rng rng(3);
    const auto traj = run_expert(ctx, t, rng);
    REQUIRE(traj.has_value());
    double rotated = 0.0;
    for (const auto& st : traj->steps) {
      using sim::Action;
      if (st.action == Action::MoveBaseFwd) break;
      if (st.action == Action::RotateLeft30) rotated += 30;
      if (st.action == Action::RotateRight30) rotated -= 30;
      if (st.action == Action::RotateLeft6) rotated += 6;
      if (st.action == Action::RotateRight6) rotated -= 6;
    }
    CHECK(std::abs(std::abs(rotated) - 180.0) <= 6.0);
  }
}

TEST_CASE("straight 1 m corridor: five forward steps") {
  const Catalog& cat = builtin_catalog();
  House h = open_house();
  const int ball = cat.asset_index("basketball");
  worldgen::ObjectInstance o;
  o.id = 0;
  o.asset = ball;
  o.synset = cat.assets[ball].synset;
  // 1.62 m ahead: the nearest interactable ring cell sits ~1 m out, so the
  // follower drives about 1.0 m straight.
  o.position = {6.62, 5.0, 0.12};
  o.dims = cat.assets[ball].dims;
  o.room = 0;
  o.pickupable = true;
  h.objects.push_back(o);
  HouseContext ctx(cat, h);
  const TaskSpec t = make_object_nav(ctx, 0, Vec2{4.0, 5.0}, 0.0);
  Rng rng(3);
  const auto traj = run_expert(ctx, t, rng);
  REQUIRE(traj.has_value());
  int moves = 0;
  for (const auto& st : traj->steps) {
    if (st.action == sim::Action::MoveBaseFwd) ++moves;
  }
  CHECK(moves >= 5);
  CHECK(moves <= 9);
}

TEST_CASE("pickup subroutine grasps a reachable target; far target fails") {
  const Catalog& cat = builtin_catalog();
  House h = open_house();
  const int mug = cat.asset_index("mug_red");
  worldgen::ObjectInstance o;
  o.id = 0;
  o.asset = mug;
  o.synset = cat.assets[mug].synset;
  o.position = {5.0, 4.5, 0.45};
  o.dims = cat.assets[mug].dims;
  o.room = 0;
  o.pickupable = true;
  h.objects.push_back(o);
  HouseContext ctx(cat, h);

  TaskSpec t;
  t.kind = TaskKind::PickUp;
  t.house_seed = 0;
  t.valid_target_ids = {0};
  t.instruction = "pick up a mug";
  // Manip axis (theta - 90) points at the mug from this pose.
  t.spawn.pose = {5.0, 5.0, 90.0};

  Rng rng(5);
  const auto traj = run_expert(ctx, t, rng);
  REQUIRE(traj.has_value());
  CHECK(traj->success);

  // Beyond arm reach (> mount + max extension + grasp slack) and blocked by
  // nothing: the planner walks instead; force failure with an empty grid
  // reach by spawning outside grasp range and forbidding movement via cap.
  ExpertOptions tight;
  tight.step_cap = 3;
  Rng rng2(5);
  const auto fail = run_expert(ctx, t, rng2, tight);
  // With a 3-step cap the subroutine cannot complete.
  CHECK(!fail.has_value());
}

TEST_CASE("pickup retry statistics over seeded runs") {
  const Catalog& cat = builtin_catalog();
  House h = open_house();
  const int mug = cat.asset_index("mug_red");
  worldgen::ObjectInstance o;
  o.id = 0;
  o.asset = mug;
  o.synset = cat.assets[mug].synset;
  o.position = {5.0, 4.5, 0.45};
  o.dims = cat.assets[mug].dims;
  o.room = 0;
  o.pickupable = true;
  h.objects.push_back(o);
  HouseContext ctx(cat, h);
  TaskSpec t;
  t.kind = TaskKind::PickUp;
  t.valid_target_ids = {0};
  t.instruction = "pick up a mug";
  t.spawn.pose = {5.0, 5.0, 90.0};

  Rng rng(20250810);
  int retried = 0, total = 0;
  for (int i = 0; i < 2000; ++i) {
    const auto traj = run_expert(ctx, t, rng);
    REQUIRE(traj.has_value());
    ++total;
    if (traj->pickup_retried) ++retried;
  }
  const double frac = static_cast<double>(retried) / total;
  CHECK(frac > 0.17);  // the full 1e4-run bound lives in the acceptance suite
  CHECK(frac < 0.23);
}

TEST_CASE("room visit: one SubDone per room, centers reached") {
  const Catalog& cat = builtin_catalog();
  SamplerCounters counters(cat);
  Rng rng(808);
  int done = 0;
  for (uint64_t seed = 900; seed < 940 && done < 6; ++seed) {
    const House h = worldgen::generate_house(cat, seed);
    HouseContext ctx(cat, h);
    auto spec = taskgen::sample_task(TaskKind::RoomVisit, ctx, counters, rng);
    REQUIRE(spec.has_value());
    ExpertOptions opts;
    const auto traj = run_expert(ctx, *spec, rng, opts);
    if (!traj) continue;  // rare center-plan failures discard
    ++done;
    int subdone = 0;
    for (const auto& st : traj->steps)
      if (st.action == sim::Action::SubDone) ++subdone;
    CHECK(subdone == static_cast<int>(h.rooms.size()));
    CHECK(traj->steps.back().action == sim::Action::Terminate);
    CHECK(traj->steps.size() <= 1000);

    // Replay: every room center approached within 0.25 m at some step.
    sim::Sim replay(cat, h);
    replay.spawn(spec->spawn.pose.x, spec->spawn.pose.y, spec->spawn.pose.theta);
    std::vector<double> best(h.rooms.size(), 1e9);
    for (const auto& st : traj->steps) {
      replay.step(st.action);
      for (const auto& room : h.rooms)
        best[room.id] = std::min(best[room.id],
                                 dist(replay.state().pose.xy(), room.center()));
    }
    for (double b : best) CHECK(b <= 0.25 + 1e-9);
  }
  CHECK(done >= 4);
}

TEST_CASE("retained trajectories replay bit-exactly to success") {
  const Catalog& cat = builtin_catalog();
  SamplerCounters counters(cat);
  Rng rng(31337);
  int replayed = 0;
  for (uint64_t seed = 1000; seed < 1012; ++seed) {
    const House h = worldgen::generate_house(cat, seed);
    HouseContext ctx(cat, h);
    for (TaskKind kind : {TaskKind::ObjectNav, TaskKind::Fetch, TaskKind::RoomNav}) {
      auto spec = taskgen::sample_task(kind, ctx, counters, rng);
      if (!spec) continue;
      auto traj = run_expert(ctx, *spec, rng);
      if (!traj) continue;
      ++replayed;

      sim::Sim replay(cat, h);
      replay.spawn(spec->spawn.pose.x, spec->spawn.pose.y, spec->spawn.pose.theta);
      bench::RolloutLog log;
      log.reset(replay);
      for (const auto& st : traj->steps) {
        // Recomputed observation matches the stored one exactly.
        const auto obs = replay.observe(spec->valid_target_ids);
        CHECK(obs.nav.cls == st.obs.nav.cls);
        CHECK(obs.nav.depth == st.obs.nav.depth);
        CHECK(obs.manip.cls == st.obs.manip.cls);
        CHECK(obs.object_in_hand == st.obs.object_in_hand);
        log.apply(replay, st.action, spec->valid_target_ids);
      }
      const auto result = bench::judge(replay, *spec, log);
      CHECK(result.success);
    }
  }
  CHECK(replayed >= 15);
}

TEST_CASE("exploration expert approaches targets and covers rooms") {
  const Catalog& cat = builtin_catalog();
  SamplerCounters counters(cat);
  Rng rng(606);
  int done = 0;
  for (uint64_t seed = 1100; seed < 1140 && done < 5; ++seed) {
    const House h = worldgen::generate_house(cat, seed);
    if (h.rooms.size() < 2) continue;
    HouseContext ctx(cat, h);
    auto spec = taskgen::sample_task(TaskKind::ObjectNav, ctx, counters, rng);
    if (!spec) continue;
    ExpertOptions opts;
    opts.exploration = true;
    const auto traj = run_exploration_expert(ctx, *spec, rng, opts);
    if (!traj) continue;
    ++done;
    CHECK(traj->success);
    CHECK(traj->steps.back().action == sim::Action::Terminate);
  }
  CHECK(done >= 3);
}
