#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace domus {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  bool operator==(const Vec2&) const = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm2(Vec2 a) { return dot(a, a); }
inline double norm(Vec2 a) { return std::sqrt(norm2(a)); }
inline double dist(Vec2 a, Vec2 b) { return norm(a - b); }

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  bool operator==(const Vec3&) const = default;
};

inline double dist(Vec3 a, Vec3 b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// Axis-aligned rectangle, lo inclusive, hi exclusive for containment tests.
struct Rect {
  Vec2 lo;
  Vec2 hi;

  double width() const { return hi.x - lo.x; }
  double height() const { return hi.y - lo.y; }
  double area() const { return width() * height(); }
  Vec2 center() const { return {(lo.x + hi.x) * 0.5, (lo.y + hi.y) * 0.5}; }
  bool contains(Vec2 p) const {
    return p.x >= lo.x && p.x < hi.x && p.y >= lo.y && p.y < hi.y;
  }
  bool contains_closed(Vec2 p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y;
  }
  bool overlaps(const Rect& o) const {
    return lo.x < o.hi.x && o.lo.x < hi.x && lo.y < o.hi.y && o.lo.y < hi.y;
  }
  Rect inflated(double m) const {
    return {{lo.x - m, lo.y - m}, {hi.x + m, hi.y + m}};
  }
  bool operator==(const Rect&) const = default;
};

struct Segment {
  Vec2 a;
  Vec2 b;
};

// Squared distance from point p to segment [a,b].
inline double point_segment_dist2(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = norm2(ab);
  if (len2 <= 0.0) return norm2(p - a);
  double t = dot(p - a, ab) / len2;
  t = std::clamp(t, 0.0, 1.0);
  const Vec2 q = a + ab * t;
  return norm2(p - q);
}

// Squared distance between segments [a1,b1] and [a2,b2].
double segment_segment_dist2(Vec2 a1, Vec2 b1, Vec2 a2, Vec2 b2);

// True iff segments [a1,b1] and [a2,b2] properly or improperly intersect.
bool segments_intersect(Vec2 a1, Vec2 b1, Vec2 a2, Vec2 b2);

// Ray from `origin` along unit `dir`: parametric distance to the first
// intersection with segment [a,b], or a negative value if none.
double ray_segment_hit(Vec2 origin, Vec2 dir, Vec2 a, Vec2 b);

// Parametric entry distance of the ray into rect r (slab method); negative
// if the ray misses. Entry at 0 when the origin is inside.
double ray_rect_hit(Vec2 origin, Vec2 dir, const Rect& r);

// Minimum distance between two axis-aligned 3-D boxes given by center and
// full dimensions. Zero when they touch or overlap.
double box_box_distance(Vec3 ca, Vec3 da, Vec3 cb, Vec3 db);

// Wrap an angle in degrees to [0, 360).
inline double wrap_deg(double a) {
  a = std::fmod(a, 360.0);
  if (a < 0.0) a += 360.0;
  return a;
}

// Signed smallest difference a-b in degrees, result in (-180, 180].
inline double angle_diff_deg(double a, double b) {
  double d = std::fmod(a - b, 360.0);
  if (d > 180.0) d -= 360.0;
  if (d <= -180.0) d += 360.0;
  return d;
}

}  // namespace domus
