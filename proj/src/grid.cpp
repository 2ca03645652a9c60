#include "affine_swarm/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <queue>
#include <sstream>

#include "affine_swarm/errors.hpp"

namespace affine_swarm {

OccupancyGrid::OccupancyGrid(const Vec3& origin, double cell_size, const CellIndex& dims)
    : origin_(origin), cell_size_(cell_size), dims_(dims) {
  if (!(cell_size > 0.0)) throw InvalidArgument("cell_size must be positive");
  if (dims[0] <= 0 || dims[1] <= 0 || dims[2] <= 0) throw InvalidArgument("grid dims must be positive");
  cells_.assign(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], 0);
}

std::size_t OccupancyGrid::occupied_count() const {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), 1));
}

bool OccupancyGrid::contains(const Vec3& p) const {
  for (int k = 0; k < 3; ++k) {
    const double rel = (p[k] - origin_[k]) / cell_size_;
    if (rel < 0.0 || rel >= dims_[k]) return false;
  }
  return true;
}

CellIndex OccupancyGrid::cell_of(const Vec3& p) const {
  CellIndex c;
  for (int k = 0; k < 3; ++k) c[k] = static_cast<int>(std::floor((p[k] - origin_[k]) / cell_size_));
  return c;
}

Vec3 OccupancyGrid::cell_center(const CellIndex& c) const {
  return origin_ + cell_size_ * Vec3(c[0] + 0.5, c[1] + 0.5, c[2] + 0.5);
}

void OccupancyGrid::add_box(const Vec3& lo, const Vec3& hi) {
  CellIndex first = cell_of(lo), last = cell_of(hi);
  for (int k = 0; k < 3; ++k) {
    first[k] = std::max(first[k], 0);
    last[k] = std::min(last[k], dims_[k] - 1);
  }
  for (int z = first[2]; z <= last[2]; ++z) {
    for (int y = first[1]; y <= last[1]; ++y) {
      for (int x = first[0]; x <= last[0]; ++x) {
        const Vec3 c = cell_center({x, y, z});
        if ((c.array() >= lo.array()).all() && (c.array() <= hi.array()).all()) set_occupied({x, y, z});
      }
    }
  }
}

namespace {

// Distance from p to the closed box of cell c.
double distance_to_cell(const OccupancyGrid& grid, const CellIndex& c, const Vec3& p) {
  const Vec3 lo = grid.origin() + grid.cell_size() * Vec3(c[0], c[1], c[2]);
  const Vec3 hi = lo + Vec3::Constant(grid.cell_size());
  const Vec3 d = (lo - p).cwiseMax(p - hi).cwiseMax(0.0);
  return d.norm();
}

}  // namespace

double OccupancyGrid::clearance(const Vec3& p, double search_radius) const {
  const int reach = static_cast<int>(std::ceil(search_radius / cell_size_)) + 1;
  const CellIndex centre = cell_of(p);
  double best = std::numeric_limits<double>::infinity();
  for (int z = std::max(0, centre[2] - reach); z <= std::min(dims_[2] - 1, centre[2] + reach); ++z) {
    for (int y = std::max(0, centre[1] - reach); y <= std::min(dims_[1] - 1, centre[1] + reach); ++y) {
      for (int x = std::max(0, centre[0] - reach); x <= std::min(dims_[0] - 1, centre[0] + reach); ++x) {
        if (!occupied({x, y, z})) continue;
        best = std::min(best, distance_to_cell(*this, {x, y, z}, p));
      }
    }
  }
  return best <= search_radius ? best : std::numeric_limits<double>::infinity();
}

OccupancyGrid read_grid(std::istream& in) {
  Vec3 origin = Vec3::Zero();
  double cell_size = 0.0;
  CellIndex dims{0, 0, 0};
  bool have_origin = false, have_cell = false, have_dims = false, in_rle = false;
  std::vector<std::pair<long long, int>> runs;

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    if (in_rle) {
      std::string token;
      while (ls >> token) {
        const auto colon = token.find(':');
        if (colon == std::string::npos) {
          throw InvalidArgument("grid line " + std::to_string(line_no) + ": bad run token '" + token + "'");
        }
        long long count = 0;
        int value = 0;
        try {
          count = std::stoll(token.substr(0, colon));
          value = std::stoi(token.substr(colon + 1));
        } catch (const std::exception&) {
          throw InvalidArgument("grid line " + std::to_string(line_no) + ": bad run token '" + token + "'");
        }
        if (count < 0 || (value != 0 && value != 1)) {
          throw InvalidArgument("grid line " + std::to_string(line_no) + ": bad run token '" + token + "'");
        }
        runs.emplace_back(count, value);
      }
      continue;
    }
    std::string key;
    ls >> key;
    if (key == "origin") {
      have_origin = static_cast<bool>(ls >> origin[0] >> origin[1] >> origin[2]);
    } else if (key == "cell_size") {
      have_cell = static_cast<bool>(ls >> cell_size);
    } else if (key == "dims") {
      have_dims = static_cast<bool>(ls >> dims[0] >> dims[1] >> dims[2]);
    } else if (key == "rle") {
      in_rle = true;
    } else {
      throw InvalidArgument("grid line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  if (!have_origin || !have_cell || !have_dims || !in_rle) {
    throw InvalidArgument("grid header needs origin, cell_size, dims and rle");
  }
  OccupancyGrid grid(origin, cell_size, dims);
  std::size_t pos = 0;
  std::vector<std::uint8_t> cells(grid.cell_count(), 0);
  for (const auto& [count, value] : runs) {
    if (pos + static_cast<std::size_t>(count) > cells.size()) {
      throw InvalidArgument("grid run lengths exceed the cell count");
    }
    std::fill_n(cells.begin() + static_cast<std::ptrdiff_t>(pos), count, static_cast<std::uint8_t>(value));
    pos += static_cast<std::size_t>(count);
  }
  if (pos != cells.size()) {
    throw InvalidArgument("grid run lengths cover " + std::to_string(pos) + " of " +
                          std::to_string(cells.size()) + " cells");
  }
  for (int z = 0; z < dims[2]; ++z) {
    for (int y = 0; y < dims[1]; ++y) {
      for (int x = 0; x < dims[0]; ++x) {
        if (cells[grid.linear_index({x, y, z})]) grid.set_occupied({x, y, z});
      }
    }
  }
  return grid;
}

OccupancyGrid load_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open grid file " + path);
  return read_grid(in);
}

void write_grid(std::ostream& out, const OccupancyGrid& grid) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "origin %.17g %.17g %.17g\n", grid.origin()[0], grid.origin()[1],
                grid.origin()[2]);
  out << buf;
  std::snprintf(buf, sizeof buf, "cell_size %.17g\n", grid.cell_size());
  out << buf;
  out << "dims " << grid.dims()[0] << ' ' << grid.dims()[1] << ' ' << grid.dims()[2] << "\nrle\n";
  const auto& cells = grid.cells();
  int on_line = 0;
  for (std::size_t i = 0; i < cells.size();) {
    std::size_t j = i;
    while (j < cells.size() && cells[j] == cells[i]) ++j;
    out << (j - i) << ':' << int(cells[i]);
    out << (++on_line % 16 == 0 ? '\n' : ' ');
    i = j;
  }
  if (on_line % 16 != 0) out << '\n';
}

void save_grid(const std::string& path, const OccupancyGrid& grid) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write grid file " + path);
  write_grid(out, grid);
}

std::vector<std::uint8_t> inflate(const OccupancyGrid& grid, double radius) {
  std::vector<std::uint8_t> blocked(grid.cell_count(), 0);
  const auto& dims = grid.dims();
  const int reach = static_cast<int>(std::ceil(radius / grid.cell_size())) + 1;
  for (int z = 0; z < dims[2]; ++z) {
    for (int y = 0; y < dims[1]; ++y) {
      for (int x = 0; x < dims[0]; ++x) {
        if (!grid.occupied({x, y, z})) continue;
        for (int cz = std::max(0, z - reach); cz <= std::min(dims[2] - 1, z + reach); ++cz) {
          for (int cy = std::max(0, y - reach); cy <= std::min(dims[1] - 1, y + reach); ++cy) {
            for (int cx = std::max(0, x - reach); cx <= std::min(dims[0] - 1, x + reach); ++cx) {
              const std::size_t idx = grid.linear_index({cx, cy, cz});
              if (blocked[idx]) continue;
              if (distance_to_cell(grid, {x, y, z}, grid.cell_center({cx, cy, cz})) < radius) blocked[idx] = 1;
            }
          }
        }
      }
    }
  }
  return blocked;
}

GridPath astar_search(const CellIndex& dims, const std::vector<std::uint8_t>& blocked,
                      const CellIndex& start, const CellIndex& goal) {
  const auto in_bounds = [&](const CellIndex& c) {
    return c[0] >= 0 && c[1] >= 0 && c[2] >= 0 && c[0] < dims[0] && c[1] < dims[1] && c[2] < dims[2];
  };
  const auto index = [&](const CellIndex& c) {
    return static_cast<std::size_t>(c[0]) +
           static_cast<std::size_t>(dims[0]) * (static_cast<std::size_t>(c[1]) +
                                                static_cast<std::size_t>(dims[1]) * c[2]);
  };
  if (!in_bounds(start) || blocked[index(start)]) throw InvalidArgument("A* start cell is occupied or outside the grid");
  if (!in_bounds(goal) || blocked[index(goal)]) throw InvalidArgument("A* goal cell is occupied or outside the grid");

  const auto heuristic = [&](const CellIndex& c) {
    const double dx = c[0] - goal[0], dy = c[1] - goal[1], dz = c[2] - goal[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
  };
  static const double kStep[4] = {0.0, 1.0, std::sqrt(2.0), std::sqrt(3.0)};

  const std::size_t total = blocked.size();
  std::vector<double> g(total, std::numeric_limits<double>::infinity());
  std::vector<std::int64_t> parent(total, -1);
  std::vector<std::uint8_t> closed(total, 0);
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;

  const std::size_t s = index(start), t = index(goal);
  g[s] = 0.0;
  open.emplace(heuristic(start), s);
  const std::size_t plane = static_cast<std::size_t>(dims[0]) * dims[1];
  while (!open.empty()) {
    const auto [f, cur] = open.top();
    open.pop();
    if (closed[cur]) continue;
    closed[cur] = 1;
    if (cur == t) break;
    const CellIndex c{static_cast<int>(cur % dims[0]), static_cast<int>((cur / dims[0]) % dims[1]),
                      static_cast<int>(cur / plane)};
    for (int dz = -1; dz <= 1; ++dz) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int moves = std::abs(dx) + std::abs(dy) + std::abs(dz);
          if (moves == 0) continue;
          const CellIndex nb{c[0] + dx, c[1] + dy, c[2] + dz};
          if (!in_bounds(nb)) continue;
          const std::size_t ni = index(nb);
          if (blocked[ni] || closed[ni]) continue;
          const double cand = g[cur] + kStep[moves];
          if (cand < g[ni]) {
            g[ni] = cand;
            parent[ni] = static_cast<std::int64_t>(cur);
            open.emplace(cand + heuristic(nb), ni);
          }
        }
      }
    }
  }
  if (!closed[t]) throw NotFoundError("no path between start and goal");

  GridPath path;
  path.cost = g[t];
  for (std::int64_t cur = static_cast<std::int64_t>(t); cur >= 0; cur = parent[cur]) {
    const auto u = static_cast<std::size_t>(cur);
    path.cells.push_back({static_cast<int>(u % dims[0]), static_cast<int>((u / dims[0]) % dims[1]),
                          static_cast<int>(u / plane)});
  }
  std::reverse(path.cells.begin(), path.cells.end());
  return path;
}

bool segment_clear(const OccupancyGrid& grid, const std::vector<std::uint8_t>& blocked,
                   const Vec3& a, const Vec3& b) {
  const double length = (b - a).norm();
  const int samples = std::max(1, static_cast<int>(std::ceil(length / (grid.cell_size() / 10.0))));
  for (int k = 0; k <= samples; ++k) {
    const Vec3 p = a + (b - a) * (static_cast<double>(k) / samples);
    const CellIndex c = grid.cell_of(p);
    if (!grid.in_bounds(c) || blocked[grid.linear_index(c)]) return false;
  }
  return true;
}

std::vector<Vec3> astar_waypoints(const OccupancyGrid& grid, const Vec3& d0, const Vec3& df,
                                  double r_max) {
  if (!grid.contains(d0)) throw InvalidArgument("start point lies outside the grid");
  if (!grid.contains(df)) throw InvalidArgument("goal point lies outside the grid");
  const auto blocked = inflate(grid, r_max + grid.cell_size());
  const CellIndex start = grid.cell_of(d0), goal = grid.cell_of(df);
  if (blocked[grid.linear_index(start)]) throw InvalidArgument("start point is inside inflated obstacles");
  if (blocked[grid.linear_index(goal)]) throw InvalidArgument("goal point is inside inflated obstacles");

  const GridPath path = astar_search(grid.dims(), blocked, start, goal);
  std::vector<Vec3> points;
  points.push_back(d0);
  for (std::size_t k = 1; k + 1 < path.cells.size(); ++k) points.push_back(grid.cell_center(path.cells[k]));
  points.push_back(df);

  std::vector<Vec3> waypoints{points.front()};
  std::size_t anchor = 0;
  while (anchor + 1 < points.size()) {
    std::size_t next = anchor + 1;
    for (std::size_t j = points.size() - 1; j > anchor + 1; --j) {
      if (segment_clear(grid, blocked, points[anchor], points[j])) {
        next = j;
        break;
      }
    }
    waypoints.push_back(points[next]);
    anchor = next;
  }
  // Coincident start and goal collapse to a single rest point.
  if (waypoints.size() == 2 && (waypoints[0] - waypoints[1]).norm() == 0.0) waypoints.pop_back();
  return waypoints;
}

}  // namespace affine_swarm
