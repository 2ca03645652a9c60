#include <gtest/gtest.h>

#include <random>

#include "affine_swarm/swarm_sim.hpp"
#include "json.hpp"

using namespace affine_swarm;

namespace {

Formation grid9() {
  Formation f;
  f.dimension = 2;
  for (int j = 0; j < 3; ++j) {
    for (int i = 0; i < 3; ++i) f.positions.emplace_back(8.0 + 2.0 * i, 8.0 + 2.0 * j, 10.0);
  }
  f.leaders = {0, 2, 6};
  return f;
}

SafetyBounds bounds() {
  SafetyBounds b;
  b.delta = 0.115;
  b.epsilon = 0.1;
  b.r_max = 4.0;
  b.lambda_min = 0.2;
  b.lambda_max = 2.0;
  return b;
}

SwarmConfig config(int threads) {
  SwarmConfig c;
  c.params.mass = 0.5;
  c.params.inertia = Vec3(0.0075, 0.0075, 0.013).asDiagonal();
  c.dt = 2e-3;
  c.threads = threads;
  c.log_stride = 5;
  return c;
}

TrajectoryLog two_agent_log(const std::vector<std::pair<Vec3, Vec3>>& samples) {
  TrajectoryLog log;
  log.agents = 2;
  double t = 0.0;
  for (const auto& [a, b] : samples) {
    log.times.push_back(t);
    log.centers.push_back(0.5 * (a + b));
    AgentRecord ra, rb;
    ra.r = ra.r_a = a;
    rb.r = rb.r_a = b;
    log.records.push_back(ra);
    log.records.push_back(rb);
    t += 0.1;
  }
  return log;
}

}  // namespace

TEST(SwarmSim, StaticPlanHoldsFormation) {
  const auto f = grid9();
  const auto plan = make_plan({Vec3(10, 10, 10), Vec3(10, 10, 10)}, DeformationFeatures::undeformed(),
                              DeformationFeatures::undeformed(), bounds(), 0.0, 2.0);
  const auto res = simulate_nonlinear(AffineTrajectory(plan, f.positions), build_topology(f), config(1));
  ASSERT_FALSE(res.aborted);
  EXPECT_LT(res.monitor.max_deviation, 1e-6);
  EXPECT_NEAR(res.log.times.back(), 2.0, 1e-12);
  EXPECT_NEAR(res.monitor.min_separation, 2.0, 1e-6);
}

TEST(SwarmSim, MovingPlanTracksAndIsThreadDeterministic) {
  const auto f = grid9();
  DeformationFeatures target = DeformationFeatures::undeformed();
  target.stretch(1) = 0.6;
  const auto plan = make_plan({Vec3(10, 10, 10), Vec3(16, 12, 10)}, DeformationFeatures::undeformed(), target,
                              bounds(), 0.0, 20.0);
  const AffineTrajectory traj(plan, f.positions);
  const auto topo = build_topology(f);
  const auto a = simulate_nonlinear(traj, topo, config(1));
  const auto b = simulate_nonlinear(traj, topo, config(3));
  ASSERT_FALSE(a.aborted);
  EXPECT_GT(a.monitor.max_deviation, 0.0);
  EXPECT_LT(a.monitor.max_deviation, 0.115);
  ASSERT_EQ(a.log.records.size(), b.log.records.size());
  for (std::size_t k = 0; k < a.log.records.size(); ++k) {
    ASSERT_EQ(a.log.records[k].r, b.log.records[k].r);
    ASSERT_EQ(a.log.records[k].p, b.log.records[k].p);
  }
  // Logged deviation is ||r - r_a|| and the final samples sit near the target.
  const int last = a.log.samples() - 1;
  for (int i = 0; i < 9; ++i) {
    const auto& rec = a.log.at(last, i);
    EXPECT_NEAR(rec.dev, (rec.r - rec.r_a).norm(), 1e-12);
  }
  EXPECT_LT((a.log.centers.back() - Vec3(16, 12, 10)).norm(), 1e-9);
}

TEST(MinPairwiseDistance, HashMatchesBruteForce) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0, 30);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Vec3> pts;
    for (int k = 0; k < 200; ++k) pts.emplace_back(u(rng), u(rng), 0.3 * u(rng));
    double brute = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (std::size_t j = i + 1; j < pts.size(); ++j) brute = std::min(brute, (pts[i] - pts[j]).norm());
    }
    EXPECT_EQ(min_pairwise_distance(pts, 0.5), brute);
    EXPECT_EQ(min_pairwise_distance(pts, 7.0), brute);
  }
}

TEST(AuditSafety, SeparationViolationIsReported) {
  // The agents close in to 0.15 m, below 2 epsilon = 0.2 m.
  const auto log = two_agent_log({{Vec3(0, 0, 0), Vec3(1, 0, 0)},
                                  {Vec3(0, 0, 0), Vec3(0.5, 0, 0)},
                                  {Vec3(0, 0, 0), Vec3(0.15, 0, 0)}});
  const auto rep = audit_safety(log, SafetyMonitor{0.1, 0.1, 10.0, nullptr});
  EXPECT_FALSE(rep.pass());
  EXPECT_FALSE(rep.separation.pass);
  ASSERT_TRUE(rep.separation.first.has_value());
  EXPECT_NEAR(rep.separation.first->t, 0.2, 1e-12);
  EXPECT_EQ(rep.separation.first->agent, 0);
  EXPECT_EQ(rep.separation.first->other, 1);
  EXPECT_NEAR(rep.separation.worst, 0.15, 1e-12);
  EXPECT_TRUE(rep.deviation.pass);
  EXPECT_TRUE(rep.containment.pass);
}

TEST(AuditSafety, ContainmentBoundaryIsInclusive) {
  const auto log = two_agent_log({{Vec3(-2, 0, 0), Vec3(2, 0, 0)}});
  EXPECT_TRUE(audit_safety(log, SafetyMonitor{0.1, 0.1, 2.0, nullptr}).containment.pass);
  const auto rep = audit_safety(log, SafetyMonitor{0.1, 0.1, 1.999, nullptr});
  EXPECT_FALSE(rep.containment.pass);
  EXPECT_EQ(rep.containment.violations, 2);
}

TEST(AuditSafety, DeviationAndClearance) {
  auto log = two_agent_log({{Vec3(1.5, 1.5, 1.5), Vec3(5.5, 1.5, 1.5)}});
  log.at(0, 1).dev = 0.3;
  OccupancyGrid g(Vec3::Zero(), 1.0, {8, 4, 4});
  g.set_occupied({3, 1, 1});
  const auto near_wall = audit_safety(log, SafetyMonitor{0.2, 0.6, 10.0, &g});
  EXPECT_FALSE(near_wall.deviation.pass);
  EXPECT_EQ(near_wall.deviation.first->agent, 1);
  EXPECT_TRUE(near_wall.clearance.pass);
  const auto touching = audit_safety(log, SafetyMonitor{0.2, 1.5, 10.0, &g});
  EXPECT_FALSE(touching.clearance.pass);
  const auto doc = nlohmann::json::parse(audit_json(touching));
  EXPECT_FALSE(doc.at("pass").get<bool>());
}
