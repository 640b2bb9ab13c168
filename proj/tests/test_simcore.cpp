#include <doctest.h>

#include <cmath>

#include "domus/simcore.hpp"
#include "domus/worldgen.hpp"

using namespace domus;
using namespace domus::sim;
using worldgen::builtin_catalog;
using worldgen::Catalog;
using worldgen::House;

namespace {

// Bare synthetic house: one 8x8 room, no furniture.
House empty_room_house() {
  House h;
  h.seed = 0;
  h.layout_name = "test";
  h.footprint = {{0, 0}, {8, 8}};
  worldgen::Room r;
  r.id = 0;
  r.type = worldgen::RoomType::LivingRoom;
  r.rect = h.footprint;
  h.rooms.push_back(r);
  return h;
}

void add_object(House& h, const Catalog& cat, const std::string& asset, Vec3 pos) {
  const int ai = cat.asset_index(asset);
  worldgen::ObjectInstance o;
  o.id = static_cast<int>(h.objects.size());
  o.asset = ai;
  o.synset = cat.assets[ai].synset;
  o.position = pos;
  o.dims = cat.assets[ai].dims;
  o.room = 0;
  o.pickupable = cat.assets[ai].pickupable;
  h.objects.push_back(o);
}

}  // namespace

TEST_CASE("action set has exactly 20 actions") {
  CHECK(kNumActions == 20);
  CHECK(static_cast<int>(Action::Terminate) == 19);
}

TEST_CASE("move base steps 0.20 m along heading") {
  Sim sim(builtin_catalog(), empty_room_house());
  sim.spawn(4.0, 4.0, 0.0);
  const auto res = sim.step(Action::MoveBaseFwd);
  CHECK(res.action_succeeded);
  CHECK(sim.state().pose.x == doctest::Approx(4.2).epsilon(1e-12));
  CHECK(sim.state().pose.y == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("rotation is exactly invertible") {
  Sim sim(builtin_catalog(), empty_room_house());
  sim.spawn(4.0, 4.0, 0.0);
  for (int k = 0; k < 7; ++k) sim.step(Action::RotateLeft6);
  for (int k = 0; k < 7; ++k) sim.step(Action::RotateRight6);
  CHECK(sim.state().pose.theta == 0.0);
  for (int k = 0; k < 13; ++k) sim.step(Action::RotateLeft30);
  for (int k = 0; k < 13; ++k) sim.step(Action::RotateRight30);
  CHECK(sim.state().pose.theta == 0.0);
}

TEST_CASE("moving into a wall blocks and leaves the pose unchanged") {
  Sim sim(builtin_catalog(), empty_room_house());
  // 0.1 m of clearance ahead of the disc edge: 8.0 - 0.25 - 0.1.
  sim.spawn(7.65, 4.0, 0.0);
  const auto before = sim.state().pose;
  const auto res = sim.step(Action::MoveBaseFwd);
  CHECK(!res.action_succeeded);
  CHECK(res.event == StepEvent::Blocked);
  CHECK(sim.state().pose == before);
}

TEST_CASE("arm axes clamp to their ranges") {
  Sim sim(builtin_catalog(), empty_room_house());
  sim.spawn(4, 4, 0);
  for (int i = 0; i < 15; ++i) sim.step(Action::ArmUpLarge);
  CHECK(sim.state().arm.lift == doctest::Approx(kLiftMax));
  for (int i = 0; i < 12; ++i) sim.step(Action::ArmExtendLarge);
  CHECK(sim.state().arm.extension == doctest::Approx(kExtensionMax));
  const auto res = sim.step(Action::ArmExtendSmall);
  CHECK(res.event == StepEvent::Clamped);
  for (int i = 0; i < 80; ++i) sim.step(Action::ArmDownLarge);
  CHECK(sim.state().arm.lift == 0.0);
}

TEST_CASE("gripper position trigonometry") {
  Sim sim(builtin_catalog(), empty_room_house());
  sim.spawn(0.0, 0.0, 0.0);

  SUBCASE("zero extension sits at the mount offset, right of the base") {
    const Vec3 g = gripper_position(sim.state());
    CHECK(g.x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(g.y == doctest::Approx(-kArmMountOffset).epsilon(1e-12));
    CHECK(g.z == 0.0);
  }
  SUBCASE("facing +x with 0.5 m extension: gripper at (0, -0.6)") {
    AgentState s = sim.state();
    s.arm.extension = 0.5;
    const Vec3 g = gripper_position(s);
    CHECK(g.x == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(g.y == doctest::Approx(-0.6).epsilon(1e-9));
  }
  SUBCASE("rotating the base 90 degrees rotates the gripper about the base") {
    AgentState s = sim.state();
    s.arm.extension = 0.3;
    const Vec3 g0 = gripper_position(s);
    s.pose.theta = 90.0;
    const Vec3 g1 = gripper_position(s);
    CHECK(g1.x == doctest::Approx(-g0.y).epsilon(1e-9));
    CHECK(g1.y == doctest::Approx(g0.x).epsilon(1e-9));
  }
}

TEST_CASE("pickup honors the 6 cm rule") {
  const Catalog& cat = builtin_catalog();
  House h = empty_room_house();

  SUBCASE("object at 5 cm is picked, at 7 cm is not") {
    // Gripper at (4, 3.9, 0) when the agent faces +x at (4,4).
    add_object(h, cat, "apple", {4.0, 3.85, 0.0});  // 5 cm below gripper point
    Sim sim(cat, h);
    sim.spawn(4.0, 4.0, 0.0);
    auto res = sim.step(Action::Pickup);
    CHECK(res.action_succeeded);
    CHECK(res.event == StepEvent::Picked);
    CHECK(sim.state().arm.held_object == 0);

    House h2 = empty_room_house();
    add_object(h2, cat, "apple", {4.0, 3.83, 0.0});  // 7 cm
    Sim sim2(cat, h2);
    sim2.spawn(4.0, 4.0, 0.0);
    res = sim2.step(Action::Pickup);
    CHECK(!res.action_succeeded);
    CHECK(sim2.state().arm.held_object == -1);
  }
  SUBCASE("pickup with nothing pickupable fails") {
    Sim sim(cat, empty_room_house());
    sim.spawn(4, 4, 0);
    CHECK(!sim.step(Action::Pickup).action_succeeded);
  }
  SUBCASE("pickup while holding fails; held object tracks the gripper") {
    add_object(h, cat, "apple", {4.0, 3.9, 0.0});
    Sim sim(cat, h);
    sim.spawn(4.0, 4.0, 0.0);
    REQUIRE(sim.step(Action::Pickup).action_succeeded);
    CHECK(!sim.step(Action::Pickup).action_succeeded);
    sim.step(Action::MoveBaseBack);
    sim.step(Action::ArmUpLarge);
    const Vec3 g = gripper_position(sim.state());
    CHECK(sim.house().objects[0].position == g);
    // Dropoff releases onto the floor at the gripper's planar position.
    REQUIRE(sim.step(Action::Dropoff).event == StepEvent::Dropped);
    CHECK(sim.state().arm.held_object == -1);
    CHECK(sim.house().objects[0].position.x == doctest::Approx(g.x));
    CHECK(sim.house().objects[0].bottom() == doctest::Approx(0.0));
    CHECK(!sim.step(Action::Dropoff).action_succeeded);
  }
}

TEST_CASE("replaying an action sequence reproduces the final state bit-exactly") {
  const Catalog& cat = builtin_catalog();
  const House h = worldgen::generate_house(cat, 40);
  Rng rng(5);
  std::vector<Action> actions;
  for (int i = 0; i < 400; ++i)
    actions.push_back(static_cast<Action>(rng.uniform_index(kNumActions)));

  const auto run = [&](std::vector<AgentState>* trace) {
    Sim sim(cat, h);
    const Vec2 c = h.rooms[0].center();
    sim.spawn(c.x, c.y, 30.0);
    for (Action a : actions) {
      sim.step(a);
      if (trace) trace->push_back(sim.state());
    }
    return sim.state();
  };
  std::vector<AgentState> t1, t2;
  const AgentState s1 = run(&t1);
  const AgentState s2 = run(&t2);
  CHECK(s1 == s2);
  CHECK(t1.size() == t2.size());
  for (size_t i = 0; i < t1.size(); ++i) CHECK(t1[i] == t2[i]);
}

TEST_CASE("after random walks the base never rests inside an obstacle") {
  const Catalog& cat = builtin_catalog();
  for (uint64_t seed = 50; seed < 54; ++seed) {
    const House h = worldgen::generate_house(cat, seed);
    Sim sim(cat, h);
    const Vec2 c = h.rooms[0].center();
    sim.spawn(c.x, c.y, 0.0);
    REQUIRE(!sim.base_collides(c));
    Rng rng(seed);
    for (int i = 0; i < 500; ++i) {
      sim.step(static_cast<Action>(rng.uniform_index(16)));  // motion actions only
      CHECK(!sim.base_collides(sim.state().pose.xy()));
      CHECK(sim.state().arm.lift >= 0.0);
      CHECK(sim.state().arm.lift <= kLiftMax);
      CHECK(sim.state().arm.extension >= 0.0);
      CHECK(sim.state().arm.extension <= kExtensionMax);
    }
  }
}

TEST_CASE("render: empty room free columns have max depth") {
  EgoConfig cfg;
  cfg.max_range = 2.0;
  Sim sim2(builtin_catalog(), empty_room_house(), cfg);
  sim2.spawn(4.0, 4.0, 0.0);
  const EgoRaster r2 = sim2.render(Camera::Nav);
  REQUIRE(r2.width() == cfg.width);
  for (int c = 0; c < r2.width(); ++c) {
    CHECK(r2.kind[c] == static_cast<uint8_t>(CellKind::Free));
    CHECK(r2.depth[c] == doctest::Approx(2.0));
  }
  // With the default 5 m range the walls are in range everywhere.
  Sim sim(builtin_catalog(), empty_room_house());
  sim.spawn(4.0, 4.0, 0.0);
  const EgoRaster r = sim.render(Camera::Nav);
  for (int c = 0; c < r.width(); ++c) {
    CHECK(r.depth[c] >= 0.0);
    CHECK(r.depth[c] <= sim.config().max_range);
  }
}

TEST_CASE("render: object ahead appears centered in nav, absent in manip") {
  const Catalog& cat = builtin_catalog();
  House h = empty_room_house();
  add_object(h, cat, "basketball", {5.0, 4.0, 0.12});  // 1 m ahead
  Sim sim(cat, h);
  sim.spawn(4.0, 4.0, 0.0);

  const EgoRaster nav = sim.render(Camera::Nav);
  const int w = nav.width();
  const int expected_cls = cat.class_channel(cat.assets[cat.asset_index("basketball")].synset);
  bool center_hit = nav.cls[w / 2 - 1] == expected_cls || nav.cls[w / 2] == expected_cls;
  CHECK(center_hit);
  // Depth at the center column is the entry into the ball footprint.
  for (int c = w / 2 - 1; c <= w / 2; ++c)
    if (nav.cls[c] == expected_cls) CHECK(nav.depth[c] == doctest::Approx(0.88).epsilon(0.01));

  const EgoRaster manip = sim.render(Camera::Manip);
  for (int c = 0; c < w; ++c) CHECK(manip.cls[c] != expected_cls);

  // Bearing -90 puts it center of the manipulation raster instead.
  House h2 = empty_room_house();
  add_object(h2, cat, "basketball", {4.0, 3.0, 0.12});
  Sim sim2(cat, h2);
  sim2.spawn(4.0, 4.0, 0.0);
  const EgoRaster manip2 = sim2.render(Camera::Manip);
  bool c2 = manip2.cls[w / 2 - 1] == expected_cls || manip2.cls[w / 2] == expected_cls;
  CHECK(c2);
}

TEST_CASE("objects on supporters render over the supporter") {
  const Catalog& cat = builtin_catalog();
  House h = empty_room_house();
  add_object(h, cat, "dining_table", {5.5, 4.0, 0.375});
  add_object(h, cat, "mug_red", {5.5, 4.0, 0.8});
  h.objects[1].on_top_of = 0;
  Sim sim(cat, h);
  sim.spawn(4.0, 4.0, 0.0);
  const EgoRaster nav = sim.render(Camera::Nav);
  const int mug_cls = cat.class_channel(cat.assets[cat.asset_index("mug_red")].synset);
  bool mug_seen = false;
  for (int c = 0; c < nav.width(); ++c) mug_seen |= nav.cls[c] == mug_cls;
  CHECK(mug_seen);
}

TEST_CASE("visible_objects equals brute-force wall occlusion test") {
  const Catalog& cat = builtin_catalog();
  for (uint64_t seed = 60; seed < 66; ++seed) {
    const House h = worldgen::generate_house(cat, seed);
    Sim sim(cat, h);
    const auto walls = worldgen::build_walls(h);
    Rng rng(seed * 3 + 1);
    for (int trial = 0; trial < 20; ++trial) {
      const auto& room = h.rooms[rng.uniform_index(h.rooms.size())];
      const Vec2 p{rng.uniform(room.rect.lo.x + 0.3, room.rect.hi.x - 0.3),
                   rng.uniform(room.rect.lo.y + 0.3, room.rect.hi.y - 0.3)};
      sim.spawn(p.x, p.y, 6.0 * rng.uniform_index(60));
      for (Camera cam : {Camera::Nav, Camera::Manip}) {
        const auto vis = sim.visible_objects(cam);
        std::vector<int> brute;
        const Vec2 dir = heading_dir(sim.camera_heading(cam));
        for (const auto& o : h.objects) {
          const Vec2 v{o.position.x - p.x, o.position.y - p.y};
          const double d2 = norm2(v);
          if (d2 > sim.config().visibility_range * sim.config().visibility_range) continue;
          if (d2 > 0) {
            const double dp = dot(dir, v);
            const double c45 = std::cos(M_PI / 4);
            if (dp < 0 || dp * dp < d2 * c45 * c45) continue;
          }
          bool occluded = false;
          for (const auto& wseg : walls.segments)
            if (segments_intersect(p, {o.position.x, o.position.y}, wseg.a, wseg.b)) {
              occluded = true;
              break;
            }
          if (!occluded) brute.push_back(o.id);
        }
        CHECK(vis == brute);
      }
    }
  }
}

TEST_CASE("object behind a wall is not visible") {
  const Catalog& cat = builtin_catalog();
  House h = empty_room_house();
  h.rooms.clear();
  worldgen::Room a, b;
  a.id = 0;
  a.type = worldgen::RoomType::Kitchen;
  a.rect = {{0, 0}, {4, 8}};
  b.id = 1;
  b.type = worldgen::RoomType::Bedroom;
  b.rect = {{4, 0}, {8, 8}};
  h.rooms = {a, b};
  h.doors.push_back({0, 1, true, 4.0, 6.0, 6.9});
  add_object(h, cat, "apple", {4.5, 1.0, 0.04});
  Sim sim(cat, h);
  sim.spawn(3.5, 1.0, 0.0);  // facing +x toward the apple, wall between
  CHECK(sim.visible_objects(Camera::Nav).empty());
  // Same range, object on boresight with no wall: visible.
  House h2 = empty_room_house();
  add_object(h2, cat, "apple", {5.0, 4.0, 0.04});
  Sim sim2(cat, h2);
  sim2.spawn(4.0, 4.0, 0.0);
  const auto vis = sim2.visible_objects(Camera::Nav);
  REQUIRE(vis.size() == 1);
  CHECK(vis[0] == 0);
}

TEST_CASE("detections report the target box or the dummy value") {
  const Catalog& cat = builtin_catalog();
  House h = empty_room_house();
  add_object(h, cat, "basketball", {5.0, 4.0, 0.12});
  Sim sim(cat, h);
  sim.spawn(4.0, 4.0, 0.0);
  const int targets[] = {0};
  const Observation obs = sim.observe(targets);
  CHECK(obs.det_nav.x1 < obs.det_nav.x2);
  CHECK(obs.det_nav.area > 0.0);
  CHECK(obs.det_nav.x1 > 10.0);  // roughly centered
  CHECK(obs.det_nav.x2 < 22.0);
  // Manip camera looks away from it.
  CHECK(obs.det_manip.x1 == 1000.0);
  CHECK(obs.det_manip.area == 0.0);
  const Observation none = sim.observe();
  CHECK(none.det_nav.x1 == 1000.0);
  CHECK(none.det_nav.area == 0.0);
}
