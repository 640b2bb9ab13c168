#pragma once

#include <optional>
#include <vector>

#include "domus/simcore.hpp"
#include "domus/worldgen.hpp"

namespace domus::nav {

using worldgen::Catalog;
using worldgen::House;
using worldgen::ObjectInstance;

constexpr double kCell = 0.05;

// Occupancy grid over the house footprint, obstacles inflated by the agent
// radius plus half a cell diagonal so moves between free centers are safe.
struct NavGrid {
  int nx = 0;
  int ny = 0;
  Vec2 origin;
  std::vector<uint8_t> blocked;
  std::vector<int32_t> component;  // -1 on blocked cells
  int main_component = -1;
  worldgen::WallSet walls;  // cached, shared by line-of-sight checks

  int index(int x, int y) const { return y * nx + x; }
  bool in_bounds(int x, int y) const { return x >= 0 && x < nx && y >= 0 && y < ny; }
  bool is_free(int x, int y) const { return in_bounds(x, y) && !blocked[index(x, y)]; }
  Vec2 center(int idx) const {
    return {origin.x + (idx % nx + 0.5) * kCell, origin.y + (idx / nx + 0.5) * kCell};
  }
  int cell_at(Vec2 p) const {
    const int x = static_cast<int>(std::floor((p.x - origin.x) / kCell));
    const int y = static_cast<int>(std::floor((p.y - origin.y) / kCell));
    return in_bounds(x, y) ? index(x, y) : -1;
  }
  bool in_main(int idx) const {
    return idx >= 0 && !blocked[idx] && component[idx] == main_component;
  }
  // Straight segment between p and q stays on free cells.
  bool line_free(Vec2 p, Vec2 q) const;
};

NavGrid build_navgrid(const Catalog& catalog, const House& house);

// Arm solution reaching within the grasp radius of an object center.
struct ReachSolution {
  double theta = 0.0;      // base heading, multiple of 6 degrees
  double extension = 0.0;  // multiple of 0.02 or the clamped max
  double lift = 0.0;       // multiple of 0.02
  double err = 1e9;        // resulting gripper-to-center distance
};

// Best discrete arm solution from base position `base`; succeeds when the
// error is at or below the pose acceptance threshold (slack under the
// 0.06 m grasp radius).
std::optional<ReachSolution> solve_reach(Vec2 base, Vec3 target);

constexpr double kReachAccept = 0.055;

// Free main-component cells from which `obj` can be grasped, each with its
// arm solution. Requires wall line-of-sight from the cell to the object.
struct InteractCell {
  int cell = -1;
  ReachSolution sol;
};
std::vector<InteractCell> interactable_cells(const NavGrid& grid, const House& house,
                                             const ObjectInstance& obj);

// True iff at least one interactable cell exists (early-out form).
bool has_interactable_cell(const NavGrid& grid, const House& house,
                           const ObjectInstance& obj);

// Grid distance field (8-connected, octile costs, metres).
struct DistanceField {
  std::vector<double> dist;  // infinity where unreached
  double at(int idx) const { return dist[idx]; }
};
DistanceField grid_distances(const NavGrid& grid, int start_cell);

}  // namespace domus::nav
