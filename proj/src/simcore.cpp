#include "domus/simcore.hpp"

#include <algorithm>
#include <cmath>

namespace domus::sim {

const char* action_name(Action a) {
  static const char* names[kNumActions] = {
      "move_base+",  "move_base-",  "rotate+6",   "rotate-6",   "rotate+30",
      "rotate-30",   "arm_out+2",   "arm_out-2",  "arm_out+10", "arm_out-10",
      "arm_up+2",    "arm_up-2",    "arm_up+10",  "arm_up-10",  "wrist+10",
      "wrist-10",    "pickup",      "dropoff",    "sub_done",   "terminate"};
  return names[static_cast<int>(a)];
}

Vec3 gripper_position(const AgentState& s) {
  const Vec2 dir = heading_dir(wrap_deg(s.pose.theta - 90.0));
  const double reach = kArmMountOffset + s.arm.extension;
  return {s.pose.x + dir.x * reach, s.pose.y + dir.y * reach, s.arm.lift};
}

Sim::Sim(const Catalog& catalog, House house, EgoConfig config)
    : catalog_(&catalog), house_(std::move(house)), config_(config) {
  walls_ = worldgen::build_walls(house_);
  for (const auto& o : house_.objects)
    if (o.on_top_of < 0 && !o.pickupable) blocking_.push_back(o.footprint());
  col_cos_.resize(config_.width);
  col_sin_.resize(config_.width);
  const double fov = config_.fov_deg * M_PI / 180.0;
  for (int c = 0; c < config_.width; ++c) {
    const double off = fov * 0.5 - (c + 0.5) * fov / config_.width;
    col_cos_[c] = std::cos(off);
    col_sin_[c] = std::sin(off);
  }
}

void Sim::spawn(double x, double y, double theta) {
  state_ = AgentState{};
  state_.pose = {x, y, wrap_deg(theta)};
}

bool Sim::base_collides(Vec2 p) const {
  const double r2 = kAgentRadius * kAgentRadius;
  for (const auto& w : walls_.segments)
    if (point_segment_dist2(p, w.a, w.b) < r2) return true;
  for (const auto& b : blocking_) {
    if (b.contains_closed(p)) return true;
    const Vec2 q{std::clamp(p.x, b.lo.x, b.hi.x), std::clamp(p.y, b.lo.y, b.hi.y)};
    if (norm2(p - q) < r2) return true;
  }
  return false;
}

bool Sim::move_free(Vec2 from, Vec2 to) const {
  const double r2 = kAgentRadius * kAgentRadius;
  for (const auto& w : walls_.segments)
    if (segment_segment_dist2(from, to, w.a, w.b) < r2) return false;
  for (const auto& b : blocking_) {
    if (b.contains_closed(from) || b.contains_closed(to)) return false;
    const Vec2 c[4] = {b.lo, {b.hi.x, b.lo.y}, b.hi, {b.lo.x, b.hi.y}};
    for (int i = 0; i < 4; ++i)
      if (segment_segment_dist2(from, to, c[i], c[(i + 1) % 4]) < r2) return false;
  }
  return true;
}

StepResult Sim::move_base(double sign) {
  const Vec2 dir = heading_dir(state_.pose.theta);
  const Vec2 from = state_.pose.xy();
  const Vec2 to = from + dir * (sign * kMoveStep);
  if (!move_free(from, to)) return {false, StepEvent::Blocked};
  state_.pose.x = to.x;
  state_.pose.y = to.y;
  return {};
}

StepResult Sim::try_pickup() {
  if (state_.arm.held_object >= 0) return {false, StepEvent::None};
  const Vec3 g = gripper_position(state_);
  int best = -1;
  double best_d = 0.0;
  // Id order plus strict less-than gives the lowest-id tie break.
  for (const auto& o : house_.objects) {
    if (!o.pickupable) continue;
    const double d = dist(g, o.position);
    if (d <= kGraspRadius && (best < 0 || d < best_d)) {
      best = o.id;
      best_d = d;
    }
  }
  if (best < 0) return {false, StepEvent::None};
  state_.arm.held_object = best;
  state_.arm.gripper_closed = true;
  house_.objects[best].on_top_of = -1;
  sync_held();
  return {true, StepEvent::Picked};
}

StepResult Sim::try_dropoff() {
  if (state_.arm.held_object < 0) return {false, StepEvent::None};
  ObjectInstance& obj = house_.objects[state_.arm.held_object];
  const Vec3 g = gripper_position(state_);
  // Rest on the highest supporter top within reach below the gripper,
  // otherwise on the floor.
  int supporter = -1;
  double sup_top = -1.0;
  for (const auto& o : house_.objects) {
    if (o.id == obj.id) continue;
    if (!catalog_->assets[o.asset].supporter) continue;
    if (!o.footprint().contains_closed({g.x, g.y})) continue;
    const double top = o.top();
    if (g.z >= top && g.z - top <= kGraspRadius && top > sup_top) {
      supporter = o.id;
      sup_top = top;
    }
  }
  obj.position.x = g.x;
  obj.position.y = g.y;
  obj.position.z = (supporter >= 0 ? sup_top : 0.0) + obj.dims.z * 0.5;
  obj.on_top_of = supporter;
  const int room = house_.room_at({g.x, g.y});
  if (room >= 0) obj.room = room;
  state_.arm.held_object = -1;
  state_.arm.gripper_closed = false;
  return {true, StepEvent::Dropped};
}

StepResult Sim::step(Action a) {
  StepResult res;
  switch (a) {
    case Action::MoveBaseFwd: res = move_base(1.0); break;
    case Action::MoveBaseBack: res = move_base(-1.0); break;
    case Action::RotateLeft6: state_.pose.theta = wrap_deg(state_.pose.theta + 6.0); break;
    case Action::RotateRight6: state_.pose.theta = wrap_deg(state_.pose.theta - 6.0); break;
    case Action::RotateLeft30: state_.pose.theta = wrap_deg(state_.pose.theta + 30.0); break;
    case Action::RotateRight30: state_.pose.theta = wrap_deg(state_.pose.theta - 30.0); break;
    case Action::ArmExtendSmall:
    case Action::ArmRetractSmall:
    case Action::ArmExtendLarge:
    case Action::ArmRetractLarge: {
      const double delta = (a == Action::ArmExtendSmall)    ? 0.02
                           : (a == Action::ArmRetractSmall) ? -0.02
                           : (a == Action::ArmExtendLarge)  ? 0.10
                                                            : -0.10;
      const double target = state_.arm.extension + delta;
      state_.arm.extension = std::clamp(target, 0.0, kExtensionMax);
      if (state_.arm.extension != target) res.event = StepEvent::Clamped;
      break;
    }
    case Action::ArmUpSmall:
    case Action::ArmDownSmall:
    case Action::ArmUpLarge:
    case Action::ArmDownLarge: {
      const double delta = (a == Action::ArmUpSmall)     ? 0.02
                           : (a == Action::ArmDownSmall) ? -0.02
                           : (a == Action::ArmUpLarge)   ? 0.10
                                                         : -0.10;
      const double target = state_.arm.lift + delta;
      state_.arm.lift = std::clamp(target, 0.0, kLiftMax);
      if (state_.arm.lift != target) res.event = StepEvent::Clamped;
      break;
    }
    case Action::WristLeft:
      state_.arm.wrist_deg += 10.0;
      if (state_.arm.wrist_deg > 180.0) state_.arm.wrist_deg -= 360.0;
      break;
    case Action::WristRight:
      state_.arm.wrist_deg -= 10.0;
      if (state_.arm.wrist_deg <= -180.0) state_.arm.wrist_deg += 360.0;
      break;
    case Action::Pickup: res = try_pickup(); break;
    case Action::Dropoff: res = try_dropoff(); break;
    case Action::SubDone:
    case Action::Terminate:
      break;
  }
  ++state_.step_count;
  sync_held();
  return res;
}

void Sim::sync_held() {
  if (state_.arm.held_object >= 0)
    house_.objects[state_.arm.held_object].position = gripper_position(state_);
}

EgoRaster Sim::render(Camera cam) const {
  EgoRaster r;
  r.camera = cam;
  const int w = config_.width;
  r.kind.assign(w, static_cast<uint8_t>(CellKind::Free));
  r.cls.assign(w, 0);
  r.depth.assign(w, config_.max_range);
  r.object_id.assign(w, -1);
  const Vec2 eye = state_.pose.xy();
  const Vec2 h = heading_dir(camera_heading(cam));
  for (int c = 0; c < w; ++c) {
    const Vec2 dir{h.x * col_cos_[c] - h.y * col_sin_[c],
                   h.y * col_cos_[c] + h.x * col_sin_[c]};
    double t_wall = config_.max_range;
    for (const auto& seg : walls_.segments) {
      const double t = ray_segment_hit(eye, dir, seg.a, seg.b);
      if (t >= 0.0 && t < t_wall) t_wall = t;
    }
    // Nearest object entry in front of the wall.
    int hit_id = -1;
    double t_obj = t_wall;
    for (const auto& o : house_.objects) {
      const double t = ray_rect_hit(eye, dir, o.footprint());
      if (t >= 0.0 && t < t_obj) {
        t_obj = t;
        hit_id = o.id;
      }
    }
    if (hit_id >= 0) {
      // Objects resting on the hit supporter draw over it.
      int top_id = -1;
      double t_top = config_.max_range;
      for (const auto& o : house_.objects) {
        if (o.on_top_of != hit_id) continue;
        const double t = ray_rect_hit(eye, dir, o.footprint());
        if (t >= 0.0 && t < t_top) {
          t_top = t;
          top_id = o.id;
        }
      }
      if (top_id >= 0) {
        hit_id = top_id;
        t_obj = t_top;
      }
      r.kind[c] = static_cast<uint8_t>(CellKind::Object);
      r.cls[c] = static_cast<uint8_t>(catalog_->class_channel(house_.objects[hit_id].synset));
      r.depth[c] = t_obj;
      r.object_id[c] = hit_id;
    } else if (t_wall < config_.max_range) {
      r.kind[c] = static_cast<uint8_t>(CellKind::Wall);
      r.cls[c] = 1;
      r.depth[c] = t_wall;
    }
  }
  return r;
}

bool Sim::object_visible(Camera cam, int object_id, double range) const {
  if (range <= 0.0) range = config_.visibility_range;
  const ObjectInstance& o = house_.objects.at(object_id);
  const Vec2 eye = state_.pose.xy();
  const Vec2 v{o.position.x - eye.x, o.position.y - eye.y};
  const double d2 = norm2(v);
  if (d2 > range * range) return false;
  if (d2 > 0.0) {
    const Vec2 h = heading_dir(camera_heading(cam));
    const double cos_half = std::cos(config_.fov_deg * 0.5 * M_PI / 180.0);
    const double dp = dot(h, v);
    if (dp < 0.0 || dp * dp < d2 * cos_half * cos_half) return false;
  }
  for (const auto& seg : walls_.segments)
    if (segments_intersect(eye, {o.position.x, o.position.y}, seg.a, seg.b))
      return false;
  return true;
}

std::vector<int> Sim::visible_objects(Camera cam, double range) const {
  std::vector<int> out;
  for (const auto& o : house_.objects)
    if (object_visible(cam, o.id, range)) out.push_back(o.id);
  return out;
}

Detection Sim::detect(Camera cam, std::span<const int> targets) const {
  Detection det;
  const Vec2 eye = state_.pose.xy();
  int best = -1;
  double best_d2 = 1e300;
  for (int id : targets) {
    if (!object_visible(cam, id, config_.max_range)) continue;
    const auto& o = house_.objects.at(id);
    const double d2 = norm2(Vec2{o.position.x, o.position.y} - eye);
    if (d2 < best_d2) {
      best_d2 = d2;
      best = id;
    }
  }
  if (best < 0) return det;
  const auto& o = house_.objects.at(best);
  const Vec2 h = heading_dir(camera_heading(cam));
  const Rect fp = o.footprint();
  const Vec2 corners[4] = {fp.lo, {fp.hi.x, fp.lo.y}, fp.hi, {fp.lo.x, fp.hi.y}};
  const double fov = config_.fov_deg * M_PI / 180.0;
  double lo = 1e300, hi = -1e300;
  for (const auto& cpt : corners) {
    const Vec2 v = cpt - eye;
    const double bearing = std::atan2(cross(h, v), dot(h, v));  // +left
    const double x = (fov * 0.5 - bearing) / fov * config_.width;
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  const double w = config_.width;
  det.x1 = std::clamp(lo, 0.0, w);
  det.x2 = std::clamp(hi, 0.0, w);
  const double depth = std::max(std::sqrt(best_d2), 1e-3);
  // Pinhole with a 90-degree vertical FOV: rows per metre = W / (2 * depth).
  const double half_rows = (o.dims.z * 0.5) / depth * (w * 0.5);
  det.y1 = std::clamp(w * 0.5 - half_rows, 0.0, w);
  det.y2 = std::clamp(w * 0.5 + half_rows, 0.0, w);
  det.area = (det.x2 - det.x1) * (det.y2 - det.y1);
  if (det.area <= 0.0) return Detection{};
  return det;
}

Observation Sim::observe(std::span<const int> detect_targets) const {
  Observation obs;
  obs.nav = render(Camera::Nav);
  obs.manip = render(Camera::Manip);
  obs.object_in_hand = state_.arm.held_object >= 0;
  obs.has_detections = true;
  obs.det_nav = detect(Camera::Nav, detect_targets);
  obs.det_manip = detect(Camera::Manip, detect_targets);
  return obs;
}

}  // namespace domus::sim
