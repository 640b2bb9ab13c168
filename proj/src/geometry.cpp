#include "domus/geometry.hpp"

#include <limits>

namespace domus {

static int orientation(Vec2 a, Vec2 b, Vec2 c) {
  const double v = cross(b - a, c - a);
  if (v > 0.0) return 1;
  if (v < 0.0) return -1;
  return 0;
}

static bool on_segment(Vec2 a, Vec2 b, Vec2 p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
         std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

bool segments_intersect(Vec2 a1, Vec2 b1, Vec2 a2, Vec2 b2) {
  const int o1 = orientation(a1, b1, a2);
  const int o2 = orientation(a1, b1, b2);
  const int o3 = orientation(a2, b2, a1);
  const int o4 = orientation(a2, b2, b1);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(a1, b1, a2)) return true;
  if (o2 == 0 && on_segment(a1, b1, b2)) return true;
  if (o3 == 0 && on_segment(a2, b2, a1)) return true;
  if (o4 == 0 && on_segment(a2, b2, b1)) return true;
  return false;
}

double segment_segment_dist2(Vec2 a1, Vec2 b1, Vec2 a2, Vec2 b2) {
  if (segments_intersect(a1, b1, a2, b2)) return 0.0;
  double d = point_segment_dist2(a1, a2, b2);
  d = std::min(d, point_segment_dist2(b1, a2, b2));
  d = std::min(d, point_segment_dist2(a2, a1, b1));
  d = std::min(d, point_segment_dist2(b2, a1, b1));
  return d;
}

double ray_segment_hit(Vec2 origin, Vec2 dir, Vec2 a, Vec2 b) {
  const Vec2 seg = b - a;
  const double denom = cross(dir, seg);
  if (denom == 0.0) return -1.0;  // parallel; grazing hits don't count
  const Vec2 diff = a - origin;
  const double t = cross(diff, seg) / denom;   // along the ray
  const double u = cross(diff, dir) / denom;   // along the segment
  if (t < 0.0 || u < 0.0 || u > 1.0) return -1.0;
  return t;
}

double ray_rect_hit(Vec2 origin, Vec2 dir, const Rect& r) {
  double tmin = 0.0;
  double tmax = std::numeric_limits<double>::infinity();
  const double o[2] = {origin.x, origin.y};
  const double d[2] = {dir.x, dir.y};
  const double lo[2] = {r.lo.x, r.lo.y};
  const double hi[2] = {r.hi.x, r.hi.y};
  for (int i = 0; i < 2; ++i) {
    if (d[i] == 0.0) {
      if (o[i] < lo[i] || o[i] > hi[i]) return -1.0;
    } else {
      double t1 = (lo[i] - o[i]) / d[i];
      double t2 = (hi[i] - o[i]) / d[i];
      if (t1 > t2) std::swap(t1, t2);
      tmin = std::max(tmin, t1);
      tmax = std::min(tmax, t2);
      if (tmin > tmax) return -1.0;
    }
  }
  return tmin;
}

static double axis_gap(double alo, double ahi, double blo, double bhi) {
  if (ahi < blo) return blo - ahi;
  if (bhi < alo) return alo - bhi;
  return 0.0;
}

double box_box_distance(Vec3 ca, Vec3 da, Vec3 cb, Vec3 db) {
  const double gx = axis_gap(ca.x - da.x * 0.5, ca.x + da.x * 0.5,
                             cb.x - db.x * 0.5, cb.x + db.x * 0.5);
  const double gy = axis_gap(ca.y - da.y * 0.5, ca.y + da.y * 0.5,
                             cb.y - db.y * 0.5, cb.y + db.y * 0.5);
  const double gz = axis_gap(ca.z - da.z * 0.5, ca.z + da.z * 0.5,
                             cb.z - db.z * 0.5, cb.z + db.z * 0.5);
  return std::sqrt(gx * gx + gy * gy + gz * gz);
}

}  // namespace domus
