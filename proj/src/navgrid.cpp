#include "domus/navgrid.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace domus::nav {

namespace {
// Agent radius, plus half a cell diagonal so points inside free cells keep
// the radius, plus tracking slack for the discrete-step waypoint follower.
constexpr double kInflate = sim::kAgentRadius + kCell * 0.7071067811865476 + 0.05;
}

bool NavGrid::line_free(Vec2 p, Vec2 q) const {
  const double len = dist(p, q);
  const int steps = std::max(1, static_cast<int>(std::ceil(len / (kCell * 0.5))));
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    const int idx = cell_at(p + (q - p) * t);
    if (idx < 0 || blocked[idx]) return false;
  }
  return true;
}

NavGrid build_navgrid(const Catalog& catalog, const House& house) {
  NavGrid g;
  g.origin = house.footprint.lo;
  g.nx = static_cast<int>(std::lround(house.footprint.width() / kCell));
  g.ny = static_cast<int>(std::lround(house.footprint.height() / kCell));
  g.blocked.assign(static_cast<size_t>(g.nx) * g.ny, 0);

  g.walls = worldgen::build_walls(house);
  const auto& walls = g.walls;
  auto mark = [&](const Rect& bbox, auto&& hit) {
    const int x0 = std::max(0, static_cast<int>((bbox.lo.x - g.origin.x) / kCell) - 1);
    const int x1 = std::min(g.nx - 1, static_cast<int>((bbox.hi.x - g.origin.x) / kCell) + 1);
    const int y0 = std::max(0, static_cast<int>((bbox.lo.y - g.origin.y) / kCell) - 1);
    const int y1 = std::min(g.ny - 1, static_cast<int>((bbox.hi.y - g.origin.y) / kCell) + 1);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const int idx = g.index(x, y);
        if (!g.blocked[idx] && hit(g.center(idx))) g.blocked[idx] = 1;
      }
  };
  const double r2 = kInflate * kInflate;
  for (const auto& w : walls.segments) {
    const Rect bbox{{std::min(w.a.x, w.b.x) - kInflate, std::min(w.a.y, w.b.y) - kInflate},
                    {std::max(w.a.x, w.b.x) + kInflate, std::max(w.a.y, w.b.y) + kInflate}};
    mark(bbox, [&](Vec2 c) { return point_segment_dist2(c, w.a, w.b) < r2; });
  }
  for (const auto& o : house.objects) {
    if (o.on_top_of >= 0 || o.pickupable) continue;
    (void)catalog;
    const Rect fp = o.footprint();
    mark(fp.inflated(kInflate), [&](Vec2 c) {
      const Vec2 q{std::clamp(c.x, fp.lo.x, fp.hi.x), std::clamp(c.y, fp.lo.y, fp.hi.y)};
      return fp.contains_closed(c) || norm2(c - q) < r2;
    });
  }

  // 4-connected component labels; the largest is the usable free space.
  g.component.assign(g.blocked.size(), -1);
  int next = 0;
  std::vector<int> sizes;
  std::vector<int> stack;
  for (int start = 0; start < static_cast<int>(g.blocked.size()); ++start) {
    if (g.blocked[start] || g.component[start] >= 0) continue;
    const int label = next++;
    sizes.push_back(0);
    stack.push_back(start);
    g.component[start] = label;
    while (!stack.empty()) {
      const int idx = stack.back();
      stack.pop_back();
      ++sizes[label];
      const int x = idx % g.nx, y = idx / g.nx;
      const int nbr[4][2] = {{x + 1, y}, {x - 1, y}, {x, y + 1}, {x, y - 1}};
      for (const auto& n : nbr) {
        if (!g.in_bounds(n[0], n[1])) continue;
        const int ni = g.index(n[0], n[1]);
        if (g.blocked[ni] || g.component[ni] >= 0) continue;
        g.component[ni] = label;
        stack.push_back(ni);
      }
    }
  }
  g.main_component = -1;
  int best = -1;
  for (int i = 0; i < next; ++i)
    if (sizes[i] > best) {
      best = sizes[i];
      g.main_component = i;
    }
  return g;
}

std::optional<ReachSolution> solve_reach(Vec2 base, Vec3 target) {
  const Vec2 q{target.x - base.x, target.y - base.y};
  const double d2 = norm2(q);
  const double ideal_theta = std::atan2(q.y, q.x) * 180.0 / M_PI + 90.0;
  const int k0 = static_cast<int>(std::lround(ideal_theta / 6.0));
  ReachSolution best;
  for (int dk = -1; dk <= 1; ++dk) {
    const double theta = wrap_deg((k0 + dk) * 6.0);
    const Vec2 m = sim::heading_dir(wrap_deg(theta - 90.0));
    const double proj = dot(q, m);
    const double want_ext = proj - sim::kArmMountOffset;
    double ext_lo = std::clamp(std::floor(want_ext / 0.02) * 0.02, 0.0, sim::kExtensionMax);
    double ext_hi = std::min(ext_lo + 0.02, sim::kExtensionMax);
    const double lat2 = std::max(0.0, d2 - proj * proj);
    for (double ext : {ext_lo, ext_hi}) {
      const double depth_err = proj - sim::kArmMountOffset - ext;
      const double planar2 = depth_err * depth_err + lat2;
      const double want_lift = std::clamp(target.z, 0.0, sim::kLiftMax);
      double lift = std::clamp(std::round(want_lift / 0.02) * 0.02, 0.0, sim::kLiftMax);
      const double vert = target.z - lift;
      const double err = std::sqrt(planar2 + vert * vert);
      if (err < best.err) best = {theta, ext, lift, err};
    }
  }
  if (best.err <= kReachAccept) return best;
  return std::nullopt;
}

namespace {

template <typename Fn>
void scan_candidate_cells(const NavGrid& grid, const House& house,
                          const ObjectInstance& obj, Fn&& fn) {
  const double max_r = sim::kArmMountOffset + sim::kExtensionMax + sim::kGraspRadius;
  const Vec2 c{obj.position.x, obj.position.y};
  const auto& walls = grid.walls;
  (void)house;
  const int x0 = std::max(0, static_cast<int>((c.x - max_r - grid.origin.x) / kCell));
  const int x1 = std::min(grid.nx - 1, static_cast<int>((c.x + max_r - grid.origin.x) / kCell));
  const int y0 = std::max(0, static_cast<int>((c.y - max_r - grid.origin.y) / kCell));
  const int y1 = std::min(grid.ny - 1, static_cast<int>((c.y + max_r - grid.origin.y) / kCell));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const int idx = grid.index(x, y);
      if (!grid.in_main(idx)) continue;
      const Vec2 p = grid.center(idx);
      auto sol = solve_reach(p, obj.position);
      if (!sol) continue;
      bool los = true;
      for (const auto& w : walls.segments) {
        if (segments_intersect(p, c, w.a, w.b)) {
          los = false;
          break;
        }
      }
      if (!los) continue;
      if (fn(idx, *sol)) return;
    }
  }
}

}  // namespace

std::vector<InteractCell> interactable_cells(const NavGrid& grid, const House& house,
                                             const ObjectInstance& obj) {
  std::vector<InteractCell> out;
  scan_candidate_cells(grid, house, obj, [&](int idx, const ReachSolution& sol) {
    out.push_back({idx, sol});
    return false;
  });
  return out;
}

bool has_interactable_cell(const NavGrid& grid, const House& house,
                           const ObjectInstance& obj) {
  bool found = false;
  scan_candidate_cells(grid, house, obj, [&](int, const ReachSolution&) {
    found = true;
    return true;
  });
  return found;
}

DistanceField grid_distances(const NavGrid& grid, int start_cell) {
  DistanceField f;
  f.dist.assign(grid.blocked.size(), std::numeric_limits<double>::infinity());
  if (start_cell < 0 || grid.blocked[start_cell]) return f;
  using QE = std::pair<double, int>;
  std::priority_queue<QE, std::vector<QE>, std::greater<>> pq;
  f.dist[start_cell] = 0.0;
  pq.push({0.0, start_cell});
  const double kDiag = kCell * std::sqrt(2.0);
  while (!pq.empty()) {
    const auto [d, idx] = pq.top();
    pq.pop();
    if (d > f.dist[idx]) continue;
    const int x = idx % grid.nx, y = idx / grid.nx;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        if (!grid.is_free(x + dx, y + dy)) continue;
        if (dx != 0 && dy != 0 &&
            (!grid.is_free(x + dx, y) || !grid.is_free(x, y + dy)))
          continue;  // no corner cutting
        const int ni = grid.index(x + dx, y + dy);
        const double nd = d + ((dx != 0 && dy != 0) ? kDiag : kCell);
        if (nd < f.dist[ni]) {
          f.dist[ni] = nd;
          pq.push({nd, ni});
        }
      }
    }
  }
  return f;
}

}  // namespace domus::nav
