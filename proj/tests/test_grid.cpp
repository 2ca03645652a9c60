#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "affine_swarm/errors.hpp"
#include "affine_swarm/grid.hpp"
#include "oracles.hpp"

using namespace affine_swarm;

TEST(OccupancyGrid, RleRoundTrip) {
  OccupancyGrid g(Vec3(-1, 2, 0.5), 0.5, {7, 5, 3});
  g.add_box(Vec3(0, 2, 0), Vec3(1.2, 3.1, 2));
  g.set_occupied({6, 4, 2});
  std::stringstream ss;
  write_grid(ss, g);
  const OccupancyGrid back = read_grid(ss);
  EXPECT_EQ(back.dims(), g.dims());
  EXPECT_EQ(back.cell_size(), g.cell_size());
  EXPECT_EQ(back.origin(), g.origin());
  EXPECT_EQ(back.cells(), g.cells());
  EXPECT_GT(g.occupied_count(), 1u);
}

TEST(OccupancyGrid, ParseErrors) {
  std::stringstream bad("origin 0 0 0\ncell_size 1\ndims 2 2 1\nrle\n3:0\n");
  EXPECT_THROW(read_grid(bad), Error);
  std::stringstream neg("origin 0 0 0\ncell_size -1\ndims 1 1 1\nrle\n1:0\n");
  EXPECT_THROW(read_grid(neg), Error);
}

TEST(OccupancyGrid, Clearance) {
  OccupancyGrid g(Vec3::Zero(), 1.0, {10, 10, 10});
  g.set_occupied({5, 5, 5});
  EXPECT_NEAR(g.clearance(Vec3(2.0, 5.5, 5.5), 10.0), 3.0, 1e-12);
  EXPECT_TRUE(std::isinf(g.clearance(Vec3(0.5, 0.5, 0.5), 1.0)));
}

TEST(AStar, EmptyGridIsStraight) {
  OccupancyGrid g(Vec3::Zero(), 1.0, {20, 20, 5});
  const auto wp = astar_waypoints(g, Vec3(2.5, 2.5, 2.5), Vec3(17.5, 12.5, 2.5), 1.0);
  ASSERT_EQ(wp.size(), 2u);
  EXPECT_EQ(wp.front(), Vec3(2.5, 2.5, 2.5));
  EXPECT_EQ(wp.back(), Vec3(17.5, 12.5, 2.5));
}

TEST(AStar, WallWithGapMatchesDijkstra) {
  OccupancyGrid g(Vec3::Zero(), 1.0, {30, 20, 3});
  g.add_box(Vec3(14, 0, 0), Vec3(16, 20, 3));
  for (int y = 12; y < 15; ++y) {
    for (int z = 0; z < 3; ++z) {
      g.set_occupied({14, y, z}, false);
      g.set_occupied({15, y, z}, false);
    }
  }
  const auto blocked = g.cells();
  const CellIndex s{2, 2, 1}, t{27, 3, 1};
  const GridPath path = astar_search(g.dims(), blocked, s, t);
  EXPECT_NEAR(path.cost, oracle::dijkstra_cost(g.dims(), blocked, s, t), 1e-9);
  // Shortcut polyline still clears the inflated obstacles.
  const auto wp = astar_waypoints(g, g.cell_center(s), g.cell_center(t), 0.4);
  EXPECT_GT(wp.size(), 2u);
  const auto inflated = inflate(g, 0.4 + 1.0);
  for (std::size_t k = 0; k + 1 < wp.size(); ++k) EXPECT_TRUE(segment_clear(g, inflated, wp[k], wp[k + 1]));
}

TEST(AStar, RandomGridsMatchDijkstra) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 5; ++trial) {
    const CellIndex dims{24, 24, 24};
    std::vector<std::uint8_t> blocked(24 * 24 * 24);
    std::bernoulli_distribution occ(0.3);
    for (auto& c : blocked) c = occ(rng) ? 1 : 0;
    std::uniform_int_distribution<int> u(0, 23);
    CellIndex s{u(rng), u(rng), u(rng)}, t{u(rng), u(rng), u(rng)};
    blocked[s[0] + 24 * (s[1] + 24 * s[2])] = 0;
    blocked[t[0] + 24 * (t[1] + 24 * t[2])] = 0;
    const double want = oracle::dijkstra_cost(dims, blocked, s, t);
    if (std::isinf(want)) {
      EXPECT_THROW(astar_search(dims, blocked, s, t), NotFoundError);
    } else {
      EXPECT_NEAR(astar_search(dims, blocked, s, t).cost, want, 1e-9);
    }
  }
}

TEST(AStar, EnclosedGoalAndBlockedStart) {
  OccupancyGrid g(Vec3::Zero(), 1.0, {9, 9, 9});
  for (int x = 3; x <= 5; ++x) {
    for (int y = 3; y <= 5; ++y) {
      for (int z = 3; z <= 5; ++z) g.set_occupied({x, y, z}, !(x == 4 && y == 4 && z == 4));
    }
  }
  EXPECT_THROW(astar_search(g.dims(), g.cells(), {0, 0, 0}, {4, 4, 4}), NotFoundError);
  EXPECT_THROW(astar_search(g.dims(), g.cells(), {3, 3, 3}, {0, 0, 0}), InvalidArgument);
}
