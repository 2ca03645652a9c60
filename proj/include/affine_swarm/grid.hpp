#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "affine_swarm/affine_core.hpp"

namespace affine_swarm {

using CellIndex = std::array<int, 3>;

/**
 * @brief Axis-aligned voxel occupancy map.
 *
 * Cell (x, y, z) covers origin + h * [x, x+1) x [y, y+1) x [z, z+1). Storage is
 * x-fastest, then y, then z.
 */
class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  OccupancyGrid(const Vec3& origin, double cell_size, const CellIndex& dims);

  const Vec3& origin() const { return origin_; }
  double cell_size() const { return cell_size_; }
  const CellIndex& dims() const { return dims_; }
  std::size_t cell_count() const { return cells_.size(); }

  std::size_t linear_index(const CellIndex& c) const {
    return static_cast<std::size_t>(c[0]) +
           static_cast<std::size_t>(dims_[0]) *
               (static_cast<std::size_t>(c[1]) + static_cast<std::size_t>(dims_[1]) * c[2]);
  }
  bool in_bounds(const CellIndex& c) const {
    return c[0] >= 0 && c[1] >= 0 && c[2] >= 0 && c[0] < dims_[0] && c[1] < dims_[1] && c[2] < dims_[2];
  }
  bool occupied(const CellIndex& c) const { return cells_[linear_index(c)] != 0; }
  void set_occupied(const CellIndex& c, bool value = true) { cells_[linear_index(c)] = value ? 1 : 0; }
  const std::vector<std::uint8_t>& cells() const { return cells_; }
  std::size_t occupied_count() const;

  bool contains(const Vec3& p) const;
  /// Cell containing p (may be out of bounds for points outside the grid).
  CellIndex cell_of(const Vec3& p) const;
  Vec3 cell_center(const CellIndex& c) const;

  /// Marks every cell whose centre lies in the closed box [lo, hi].
  void add_box(const Vec3& lo, const Vec3& hi);

  /**
   * @brief Distance from p to the nearest occupied cell box, searching up to
   * `search_radius`. Returns +inf when nothing occupied is that close.
   */
  double clearance(const Vec3& p, double search_radius) const;

 private:
  Vec3 origin_ = Vec3::Zero();
  double cell_size_ = 1.0;
  CellIndex dims_{0, 0, 0};
  std::vector<std::uint8_t> cells_;
};

/// Text format: `origin x y z`, `cell_size h`, `dims nx ny nz`, then `rle`
/// followed by `count:value` tokens. Lines starting with '#' are ignored.
OccupancyGrid read_grid(std::istream& in);
OccupancyGrid load_grid(const std::string& path);
void write_grid(std::ostream& out, const OccupancyGrid& grid);
void save_grid(const std::string& path, const OccupancyGrid& grid);

/// Blocked mask: a cell is blocked when its centre is closer than `radius`
/// to any occupied cell box.
std::vector<std::uint8_t> inflate(const OccupancyGrid& grid, double radius);

struct GridPath {
  std::vector<CellIndex> cells;
  double cost = 0.0;  // in cell units
};

/**
 * @brief 26-connected A* over a blocked mask with Euclidean step costs and
 * the Euclidean distance heuristic. Throws NotFoundError when the goal is
 * unreachable and InvalidArgument when start or goal is blocked.
 */
GridPath astar_search(const CellIndex& dims, const std::vector<std::uint8_t>& blocked,
                      const CellIndex& start, const CellIndex& goal);

/// True when every sample (spacing cell/10) of segment ab lies in an
/// unblocked in-bounds cell.
bool segment_clear(const OccupancyGrid& grid, const std::vector<std::uint8_t>& blocked,
                   const Vec3& a, const Vec3& b);

/**
 * @brief Waypoints d0 .. df for the containment-ball centre.
 *
 * Runs A* on the grid inflated by r_max + cell_size, then keeps only the
 * waypoints needed for greedy line-of-sight shortcutting.
 */
std::vector<Vec3> astar_waypoints(const OccupancyGrid& grid, const Vec3& d0, const Vec3& df,
                                  double r_max);

}  // namespace affine_swarm
