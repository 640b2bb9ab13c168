#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "domus/geometry.hpp"
#include "domus/worldgen.hpp"

namespace domus::sim {

using worldgen::Catalog;
using worldgen::House;
using worldgen::ObjectInstance;
using worldgen::WallSet;

// Frozen cos/sin of k*6 degrees (see trig_tables.cpp).
extern const double kHeadingCos[60];
extern const double kHeadingSin[60];

inline Vec2 heading_dir(double theta_deg) {
  const int k = static_cast<int>(std::lround(theta_deg / 6.0)) % 60;
  const int i = k < 0 ? k + 60 : k;
  return {kHeadingCos[i], kHeadingSin[i]};
}

// The 20-way discrete action set. Order is frozen: it is the wire format.
enum class Action : uint8_t {
  MoveBaseFwd = 0,   // +0.20 m along heading
  MoveBaseBack,      // -0.20 m
  RotateLeft6,       // +6 deg (counterclockwise)
  RotateRight6,      // -6 deg
  RotateLeft30,      // +30 deg
  RotateRight30,     // -30 deg
  ArmExtendSmall,    // extension +0.02 m
  ArmRetractSmall,   // extension -0.02 m
  ArmExtendLarge,    // extension +0.10 m
  ArmRetractLarge,   // extension -0.10 m
  ArmUpSmall,        // lift +0.02 m
  ArmDownSmall,      // lift -0.02 m
  ArmUpLarge,        // lift +0.10 m
  ArmDownLarge,      // lift -0.10 m
  WristLeft,         // wrist +10 deg
  WristRight,        // wrist -10 deg
  Pickup,
  Dropoff,
  SubDone,
  Terminate,
};
constexpr int kNumActions = 20;

const char* action_name(Action a);

constexpr double kMoveStep = 0.20;
constexpr double kAgentRadius = 0.25;
constexpr double kArmMountOffset = 0.10;
constexpr double kLiftMax = 1.10;
constexpr double kExtensionMax = 0.867;
constexpr double kGraspRadius = 0.06;

struct AgentPose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // degrees in [0, 360), multiples of 6 under the action set

  Vec2 xy() const { return {x, y}; }
  bool operator==(const AgentPose&) const = default;
};

struct ArmState {
  double lift = 0.0;       // [0, 1.10] m
  double extension = 0.0;  // [0, 0.867] m
  double wrist_deg = -90.0;
  bool gripper_closed = false;
  int held_object = -1;
  bool operator==(const ArmState&) const = default;
};

struct AgentState {
  AgentPose pose;
  ArmState arm;
  int step_count = 0;
  bool operator==(const AgentState&) const = default;
};

// Gripper point: base + (mount + extension) along theta - 90 deg, at lift height.
Vec3 gripper_position(const AgentState& s);

enum class Camera : uint8_t { Nav = 0, Manip = 1 };

enum class CellKind : uint8_t { Free = 0, Wall = 1, Object = 2 };

struct EgoConfig {
  int width = 32;           // ray columns per camera
  double fov_deg = 90.0;
  double max_range = 5.0;
  double visibility_range = 2.0;  // "seen" bookkeeping and judge radius
};

// One-row egocentric raster: per column the first hit's kind, raster class
// channel (0 free, 1 wall, 2+synset), and depth clamped to max_range.
struct EgoRaster {
  Camera camera = Camera::Nav;
  std::vector<uint8_t> kind;
  std::vector<uint8_t> cls;
  std::vector<double> depth;
  std::vector<int> object_id;  // -1 where no object hit

  int width() const { return static_cast<int>(cls.size()); }
};

// Ground-truth detection of the task target in one camera.
// Coordinates are in units of raster columns/rows of a notional width x width
// image; the dummy value when nothing is detected is 1000 with area 0.
struct Detection {
  double x1 = 1000.0, y1 = 1000.0, x2 = 1000.0, y2 = 1000.0;
  double area = 0.0;
};

struct Observation {
  EgoRaster nav;
  EgoRaster manip;
  bool object_in_hand = false;
  bool has_detections = false;
  Detection det_nav;
  Detection det_manip;
};

enum class StepEvent : uint8_t { None = 0, Picked, Dropped, Blocked, Clamped };

struct StepResult {
  bool action_succeeded = true;
  StepEvent event = StepEvent::None;
};

// Deterministic discrete-action simulator over one generated house. The house
// is copied in; held objects move with the gripper.
class Sim {
 public:
  Sim(const Catalog& catalog, House house, EgoConfig config = {});

  const House& house() const { return house_; }
  const Catalog& catalog() const { return *catalog_; }
  const EgoConfig& config() const { return config_; }
  const AgentState& state() const { return state_; }
  const WallSet& walls() const { return walls_; }

  void set_state(const AgentState& s) { state_ = s; sync_held(); }
  // Places the agent without collision checking; spawn sites are validated
  // by the task sampler.
  void spawn(double x, double y, double theta);

  StepResult step(Action a);

  // True iff a disc of kAgentRadius at p collides with walls or blocking
  // furniture.
  bool base_collides(Vec2 p) const;
  // True iff sweeping the base disc from `from` to `to` stays collision-free.
  bool move_free(Vec2 from, Vec2 to) const;

  EgoRaster render(Camera cam) const;
  // Objects with unobstructed wall line-of-sight within the camera FOV and
  // `range` (visibility_range when range <= 0).
  std::vector<int> visible_objects(Camera cam, double range = -1.0) const;
  bool object_visible(Camera cam, int object_id, double range = -1.0) const;

  Observation observe(std::span<const int> detect_targets = {}) const;

  double camera_heading(Camera cam) const {
    return cam == Camera::Nav ? state_.pose.theta : wrap_deg(state_.pose.theta - 90.0);
  }

  // Obstacle footprints that block base motion (floor-standing,
  // non-pickupable objects).
  const std::vector<Rect>& blocking_rects() const { return blocking_; }

 private:
  StepResult move_base(double sign);
  StepResult try_pickup();
  StepResult try_dropoff();
  void sync_held();
  Detection detect(Camera cam, std::span<const int> targets) const;

  const Catalog* catalog_;
  House house_;
  EgoConfig config_;
  WallSet walls_;
  std::vector<Rect> blocking_;
  AgentState state_;
  std::vector<double> col_cos_;  // per-column ray offsets within the FOV
  std::vector<double> col_sin_;
};

}  // namespace domus::sim
