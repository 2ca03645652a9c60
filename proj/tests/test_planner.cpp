#include <gtest/gtest.h>

#include <random>

#include "affine_swarm/errors.hpp"
#include "affine_swarm/planner.hpp"
#include "json.hpp"

using namespace affine_swarm;

namespace {

constexpr double kPi = 3.14159265358979323846;

SafetyBounds loose_bounds() {
  SafetyBounds b;
  b.delta = 0.1;
  b.epsilon = 0.1;
  b.r_max = 10;
  b.d_min = 1;
  b.d_max = 2;
  b.lambda_min = 0.4;
  b.lambda_max = 1.5;
  return b;
}

MotionPlan three_segment_plan(double tf = 30.0) {
  DeformationFeatures f = DeformationFeatures::undeformed(0.0, 0.0, 0.3);
  f.stretch(1) = -0.8;
  return make_plan({Vec3(0, 0, 0), Vec3(4, 0, 0), Vec3(4, 3, 0), Vec3(4, 3, 2)},
                   DeformationFeatures::undeformed(0.0, 0.0, 0.3), f, loose_bounds(), 0.0, tf);
}

}  // namespace

TEST(Gamma, EndpointsAndSymmetry) {
  const auto a = gamma(2.0, 2.0, 5.0);
  EXPECT_EQ(a[0], 0.0);
  EXPECT_EQ(a[1], 0.0);
  EXPECT_EQ(a[2], 0.0);
  const auto b = gamma(7.0, 2.0, 5.0);
  EXPECT_NEAR(b[0], 1.0, 1e-15);
  EXPECT_NEAR(b[1], 0.0, 1e-15);
  EXPECT_NEAR(b[2], 0.0, 1e-14);
  EXPECT_NEAR(gamma(4.5, 2.0, 5.0)[0], 0.5, 1e-15);
  EXPECT_THROW(gamma(1.0, 0.0, 0.0), InvalidArgument);
}

TEST(Gamma, DerivativesMatchFiniteDifferences) {
  const double h = 1e-5;
  for (int k = 1; k < 100; ++k) {
    const double t = 5.0 * k / 100.0;
    const auto g = gamma(t, 0.0, 5.0);
    EXPECT_NEAR(g[1], (gamma(t + h, 0.0, 5.0)[0] - gamma(t - h, 0.0, 5.0)[0]) / (2 * h), 1e-6);
    EXPECT_NEAR(g[4], (gamma(t + h, 0.0, 5.0)[3] - gamma(t - h, 0.0, 5.0)[3]) / (2 * h), 1e-6);
  }
}

TEST(MakePlan, TimingInvariants) {
  const auto plan = three_segment_plan();
  double mu = 0.0, t = 0.0;
  for (int l = 0; l < plan.segment_count(); ++l) {
    mu += plan.mu[l];
    t += plan.segment_times[l];
    EXPECT_NEAR(plan.segment_times[l], plan.mu[l] * 30.0, 1e-12);
  }
  EXPECT_NEAR(mu, 1.0, 1e-12);
  EXPECT_NEAR(t, 30.0, 1e-12);
  EXPECT_THROW(plan.segment_at(31.0), InvalidArgument);
}

TEST(RigidDisplacement, WaypointsAndMidpoints) {
  const auto plan = three_segment_plan();
  for (int l = 0; l < plan.segment_count(); ++l) {
    const double tl = plan.segment_starts[l];
    const auto d = rigid_displacement(plan, tl, l);
    for (int k = 0; k < 3; ++k) {
      EXPECT_NEAR(d[k].value(), plan.waypoints[l][k], 1e-12);
      EXPECT_NEAR(d[k].derivative(1), 0.0, 1e-12);
    }
    const auto mid = rigid_displacement(plan, tl + 0.5 * plan.segment_times[l], l);
    const Vec3 want = 0.5 * (plan.waypoints[l] + plan.waypoints[l + 1]);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(mid[k].value(), want[k], 1e-12);
  }
  // Speed along each segment is non-negative in the segment direction.
  for (int s = 0; s <= 300; ++s) {
    const double t = 30.0 * s / 300.0;
    const int l = plan.segment_at(t);
    const Vec3 dir = (plan.waypoints[l + 1] - plan.waypoints[l]).normalized();
    const auto d = rigid_displacement(plan, t, l);
    EXPECT_GE(dir.dot(Vec3(d[0].derivative(1), d[1].derivative(1), d[2].derivative(1))), -1e-12);
  }
  EXPECT_THROW(rigid_displacement(plan, -1.0), InvalidArgument);
}

TEST(ThetaTrajectory, EndpointsWaypointsAndMonotoneLambda) {
  const auto plan = three_segment_plan();
  const auto t0 = theta_trajectory(plan, 0.0);
  const auto tf = theta_trajectory(plan, 30.0);
  for (int k = 0; k < 9; ++k) {
    EXPECT_NEAR(t0.coeffs[k].value(), plan.theta0.coeffs[k], 1e-12);
    EXPECT_NEAR(tf.coeffs[k].value(), plan.thetaf.coeffs[k], 1e-12);
  }
  double cumulative = 0.0;
  for (int l = 0; l < plan.segment_count(); ++l) {
    const auto th = theta_trajectory(plan, plan.segment_starts[l], l);
    EXPECT_NEAR(th.stretch(1).value(), 1.0 + cumulative * (-0.8 - 1.0), 1e-12);
    cumulative += plan.mu[l];
  }
  double prev = 2.0;
  for (int s = 0; s <= 300; ++s) {
    const double lambda2 = theta_trajectory(plan, 30.0 * s / 300.0).stretch(1).value();
    EXPECT_LE(lambda2, prev + 1e-12);
    prev = lambda2;
  }
}

TEST(ThetaTrajectory, DerivativesContinuousAcrossWaypoints) {
  const auto plan = three_segment_plan();
  for (int l = 1; l < plan.segment_count(); ++l) {
    const double t = plan.segment_starts[l];
    const auto left = theta_trajectory(plan, t, l - 1);
    const auto right = theta_trajectory(plan, t, l);
    for (int k = 0; k < 9; ++k) {
      for (int order = 0; order < 3; ++order) {
        EXPECT_NEAR(left.coeffs[k].derivative(order), right.coeffs[k].derivative(order), 1e-12);
      }
    }
  }
}

TEST(SafetyBounds, ReferenceNumbers) {
  EXPECT_NEAR(lambda_min_bound(0.115, 0.1, 0.4387), 0.98017, 1e-4);
  EXPECT_NEAR(r_max_for_lambda_max(1.1243, 0.115, 0.1, 38.0555), 43.0, 0.1);
  EXPECT_NEAR(lambda_max_bound(0.115 + 0.1 + 38.0555, 0.115, 0.1, 38.0555), 1.0, 1e-15);
}

TEST(SafetyBounds, FromFormation) {
  const std::vector<Vec3> pos{{0, 0, 0}, {2, 0, 0}, {0, 2, 0}, {2, 2, 0}};
  const Vec3 d0(1, 1, 0);
  const auto shear = shear_angles(pos);
  const auto b = safety_bounds(pos, d0, 0.1, 0.1, 3.0, shear.beta5, shear.beta6);
  EXPECT_NEAR(b.d_min, shear.objective, 1e-12);
  EXPECT_NEAR(b.d_max, std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(b.lambda_min, 0.4 / b.d_min, 1e-12);
  EXPECT_THROW(safety_bounds(pos, d0, 0.1, 0.1, 0.15, shear.beta5, shear.beta6), InvalidArgument);
  // Window closes when r_max only barely exceeds delta + epsilon.
  EXPECT_THROW(safety_bounds(pos, d0, 0.1, 0.1, 0.21, shear.beta5, shear.beta6), Error);
}

TEST(ShearAngles, TwoAgentsOnXAxis) {
  const std::vector<Vec3> pos{{0, 0, 0}, {3, 0, 0}};
  const auto s = shear_angles(pos);
  EXPECT_NEAR(s.objective, 3.0, 1e-9);
  EXPECT_NEAR(std::abs(shear_axis(s.beta5, s.beta6).dot(Vec3::UnitX())), 1.0, 1e-9);
  const std::vector<Vec3> same{{1, 1, 1}, {1, 1, 1}};
  EXPECT_THROW(shear_angles(same), InvalidArgument);
}

TEST(ShearAngles, LatticeDirection) {
  const Vec3 v = Vec3(1, 2, -0.5).normalized();
  std::vector<Vec3> pos;
  for (int k = 0; k < 5; ++k) pos.push_back(Vec3(1, 1, 1) + 0.7 * k * v);
  const auto s = shear_angles(pos);
  EXPECT_NEAR(std::abs(shear_axis(s.beta5, s.beta6).dot(v)), 1.0, 1e-6);
}

TEST(ShearAngles, CloseToExhaustiveGrid) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-3, 3);
  std::vector<Vec3> pos;
  for (int k = 0; k < 4; ++k) pos.emplace_back(u(rng), u(rng), u(rng));
  const auto s = shear_angles(pos);
  double best = 0.0;
  const double step = 5e-4;
  const int steps = static_cast<int>(kPi / step);
  for (int i = 0; i < steps; ++i) {
    const double b5 = i * step;
    for (int j = 0; j < steps; ++j) {
      const double b6 = j * step;
      const Vec3 a = shear_axis(b5, b6);
      double m = std::numeric_limits<double>::infinity();
      for (std::size_t p = 0; p < pos.size() && m > best; ++p) {
        for (std::size_t q = p + 1; q < pos.size(); ++q) m = std::min(m, std::abs((pos[p] - pos[q]).dot(a)));
      }
      best = std::max(best, m);
    }
  }
  EXPECT_GE(s.objective, best - 1e-6 * best);
  EXPECT_NEAR(min_projected_separation(pos, s.beta5, s.beta6), s.objective, 1e-12);
}

TEST(ValidatePlan, PassesAndReportsViolations) {
  auto plan = three_segment_plan();
  auto v = validate_plan(plan, 0.05);
  EXPECT_TRUE(v.ok) << v.violation;
  EXPECT_NEAR(v.min_lambda1, 1.0, 1e-12);
  EXPECT_LE(v.max_abs_lambda, 1.0 + 1e-12);

  DeformationFeatures big = DeformationFeatures::undeformed();
  big.stretch(1) = 2.0;
  auto bounds = loose_bounds();
  bounds.lambda_max = 1.12;
  const auto bad = make_plan({Vec3::Zero(), Vec3(1, 0, 0)}, DeformationFeatures::undeformed(), big, bounds, 0.0, 10.0);
  v = validate_plan(bad, 0.01);
  EXPECT_FALSE(v.ok);
  EXPECT_FALSE(v.lambda_ok);
  ASSERT_TRUE(v.first_violation_time.has_value());
  // lambda2(t) = 1 + gamma(t); first sample above 1.12.
  int k = 0;
  while (1.0 + gamma(k * 0.01, 0.0, 10.0)[0] <= 1.12) ++k;
  EXPECT_NEAR(*v.first_violation_time, k * 0.01, 1e-9);

  plan.target_jacobian = build_jacobian(plan.thetaf);
  EXPECT_TRUE(validate_plan(plan, 0.05).target_ok);
  (*plan.target_jacobian)(0, 0) += 1e-6;
  EXPECT_FALSE(validate_plan(plan, 0.05).target_ok);
}

TEST(TimeGrid, IncludesSegmentStarts) {
  const auto plan = three_segment_plan(10.0);
  const auto grid = time_grid(plan, 0.013);
  for (double tl : plan.segment_starts) {
    EXPECT_TRUE(std::any_of(grid.begin(), grid.end(), [&](const TimeSample& s) { return s.t == tl; }));
  }
  EXPECT_EQ(grid.front().t, 0.0);
  EXPECT_NEAR(grid.back().t, 10.0, 1e-12);
  for (std::size_t k = 1; k < grid.size(); ++k) EXPECT_LE(grid[k].t - grid[k - 1].t, 0.013 + 1e-12);
}

TEST(AffineTrajectory, DesiredPositionFollowsAffineMap) {
  const auto plan = three_segment_plan();
  const std::vector<Vec3> r0{{1, 0, 0}, {0, 1, 0}, {-1, -1, 0}};
  const AffineTrajectory traj(plan, r0);
  for (double t : {0.0, 7.3, 19.9, 30.0}) {
    const auto s = traj.sample(t);
    const Mat3 q = build_jacobian(DeformationFeatures(theta_trajectory(plan, t).coeffs.unaryExpr(
        [](const Taylor4& x) { return x.value(); })));
    const auto d = rigid_displacement(plan, t);
    for (int i = 0; i < 3; ++i) {
      const auto ra = traj.desired(s, i);
      const Vec3 want = q * (r0[i] - plan.d0()) + Vec3(d[0].value(), d[1].value(), d[2].value());
      for (int k = 0; k < 3; ++k) EXPECT_NEAR(ra[k].value(), want[k], 1e-12);
    }
  }
}

TEST(PlanJson, ContainsPlanData) {
  const auto plan = three_segment_plan();
  const auto doc = nlohmann::json::parse(plan_json(plan));
  EXPECT_EQ(doc.at("waypoints").size(), 4u);
  EXPECT_EQ(doc.at("gamma_coeffs").size(), 6u);
  EXPECT_DOUBLE_EQ(doc.at("tf").get<double>(), 30.0);
}
