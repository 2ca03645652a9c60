#include <gtest/gtest.h>

#include <random>

#include <Eigen/Eigenvalues>

#include "affine_swarm/affine_core.hpp"
#include "affine_swarm/errors.hpp"
#include "affine_swarm/taylor.hpp"
#include "oracles.hpp"

using namespace affine_swarm;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::mt19937_64 rng(20240611);
double uni(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

}  // namespace

TEST(Taylor, MatchesFiniteDifferences) {
  // f(t) = sin(t) * t^2 / (1 + t), derivatives against a polynomial fit.
  const auto f = [](auto t) {
    using std::sin;
    return sin(t) * t * t / (1.0 + t);
  };
  const double t0 = 0.7;
  const Taylor4 y = f(Taylor4::variable(t0));
  const double h = 1e-2;
  std::array<double, 9> s{};
  for (int k = 0; k < 9; ++k) s[k] = f(t0 + (k - 4) * h);
  EXPECT_NEAR(y.value(), f(t0), 1e-15);
  const double d1 = (s[3] * -8 + s[5] * 8 + s[2] - s[6]) / (12 * h);
  const double d2 = (-s[2] + 16 * s[3] - 30 * s[4] + 16 * s[5] - s[6]) / (12 * h * h);
  const double d3 = (s[1] - 8 * s[2] + 13 * s[3] - 13 * s[5] + 8 * s[6] - s[7]) / (8 * h * h * h);
  const double d4 = (-s[1] + 12 * s[2] - 39 * s[3] + 56 * s[4] - 39 * s[5] + 12 * s[6] - s[7]) / (6 * h * h * h * h);
  EXPECT_NEAR(y.derivative(1), d1, 1e-7);
  EXPECT_NEAR(y.derivative(2), d2, 1e-6);
  EXPECT_NEAR(y.derivative(3), d3, 1e-4);
  EXPECT_NEAR(y.derivative(4), d4, 1e-3);
}

TEST(RotationMatrix, Examples) {
  EXPECT_LT((rotation_matrix(0.0, 0.0, 0.0) - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-15);
  Mat3 expected;
  expected << 0, 1, 0, -1, 0, 0, 0, 0, 1;
  EXPECT_LT((rotation_matrix(0.0, 0.0, kPi / 2) - expected).cwiseAbs().maxCoeff(), 1e-15);
  for (int k = 0; k < 200; ++k) {
    const double x = uni(-kPi, kPi), y = uni(-kPi, kPi), z = uni(-kPi, kPi);
    const Mat3 r = rotation_matrix(x, y, z);
    const Mat3 product = rotation_matrix(x, 0.0, 0.0) * rotation_matrix(0.0, y, 0.0) * rotation_matrix(0.0, 0.0, z);
    EXPECT_LT((r - product).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-9);
  }
}

TEST(DeformationEigvecs, Examples) {
  EXPECT_LT((deformation_eigvecs(0.0, 0.0, 0.0) - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-15);
  for (int k = 0; k < 100; ++k) {
    const double b5 = uni(0, kPi), b6 = uni(0, kPi);
    const Mat3 u = deformation_eigvecs(uni(-kPi, kPi), b5, b6);
    EXPECT_LT((u.transpose() * u - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
    const Vec3 u1 = deformation_eigvecs(0.0, b5, b6).col(0);
    EXPECT_LT((u1 - Vec3(std::cos(b5) * std::cos(b6), std::cos(b5) * std::sin(b6), -std::sin(b5))).norm(), 1e-15);
  }
}

TEST(BuildJacobian, UndeformedIsIdentity) {
  EXPECT_LT((build_jacobian(DeformationFeatures::undeformed()) - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(BuildJacobian, EqualEigenvaluesGiveScaledIdentity) {
  for (int k = 0; k < 1000; ++k) {
    DeformationFeatures f;
    const double lambda = uni(-2, 2);
    f.coeffs << lambda, lambda, lambda, 0, 0, 0, uni(-kPi, kPi), uni(-kPi, kPi), uni(-kPi, kPi);
    EXPECT_LT((deformation_matrix(f) - lambda * Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(BuildJacobian, EigenRecoveryMatchesAxes) {
  for (int k = 0; k < 200; ++k) {
    DeformationFeatures f;
    f.coeffs << uni(0.2, 1.0), uni(1.1, 2.0), uni(2.1, 3.0), uni(-kPi, kPi), uni(-1.5, 1.5), uni(-kPi, kPi),
        uni(-kPi, kPi), uni(-kPi, kPi), uni(-kPi, kPi);
    const Mat3 ud = deformation_matrix(f);
    EXPECT_LT((ud - ud.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    const Eigen::SelfAdjointEigenSolver<Mat3> es(ud);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(es.eigenvalues()[i], f.stretch(i), 1e-9);
    // Matched by eigenvector, not magnitude.
    const Mat3 axes = deformation_eigvecs(f.axis_angle(0), f.axis_angle(1), f.axis_angle(2));
    for (int i = 0; i < 3; ++i) EXPECT_LT((ud * axes.col(i) - f.stretch(i) * axes.col(i)).norm(), 1e-12);
    // Q = R_r U_D is recovered by the polar decomposition Q^T Q = U_D^2.
    const Mat3 q = build_jacobian(f);
    EXPECT_LT((q.transpose() * q - ud * ud).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(RankFn, Examples) {
  const std::vector<Vec3> collinear{{0, 0, 0}, {1, 1, 0}, {2, 2, 0}};
  EXPECT_EQ(rank_fn(collinear, 2), 1);
  const std::vector<Vec3> tri{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  EXPECT_EQ(rank_fn(tri, 2), 2);
  const std::vector<Vec3> tet{{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
  EXPECT_EQ(rank_fn(tet, 3), 3);
}

TEST(ContainmentFn, Examples) {
  const std::vector<Vec3> tri{{0, 0, 5}, {3, 0, 5}, {0, 3, 5}};
  EXPECT_EQ(std::abs(containment_fn(tri, Vec3(1, 1, 5), 2)), 3);
  EXPECT_LT(std::abs(containment_fn(tri, Vec3(10, 10, 5), 2)), 3);
  EXPECT_LE(std::abs(containment_fn(tri, tri[1], 2)), 2);
  const std::vector<Vec3> degenerate{{0, 0, 0}, {1, 1, 0}, {2, 2, 0}};
  EXPECT_THROW(containment_fn(degenerate, Vec3(1, 0, 0), 2), DegenerateSimplexError);
}

TEST(ContainmentFn, AgreesWithBarycentricOracle) {
  int checked = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    const int n = 1 + trial % 3;
    std::vector<Vec3> simplex;
    for (int k = 0; k <= n; ++k) simplex.emplace_back(uni(-5, 5), uni(-5, 5), uni(-5, 5));
    if (rank_fn(simplex, n) < n) continue;
    Eigen::VectorXd b(n + 1);
    for (int k = 0; k <= n; ++k) b[k] = uni(-0.5, 1.0);
    b /= b.sum();
    Vec3 p = Vec3::Zero();
    for (int k = 0; k <= n; ++k) p += b[k] * simplex[k];
    if (oracle::facet_distance(simplex, p) < 1e-6) continue;
    const bool inside = oracle::strictly_inside(simplex, p);
    EXPECT_EQ(std::abs(containment_fn(simplex, p, n)) == n + 1, inside);
    ++checked;
  }
  EXPECT_GT(checked, 2500);
}

TEST(LeaderCoefficients, Examples) {
  const std::vector<Vec3> leaders{{0, 0, 1}, {4, 0, 1}, {0, 4, 1}};
  const Vec3 centroid = (leaders[0] + leaders[1] + leaders[2]) / 3.0;
  const std::vector<Vec3> agents{leaders[0], leaders[1], leaders[2], centroid, {1, 2, 1}};
  const Eigen::MatrixXd h = leader_coefficients(agents, leaders, 2);
  EXPECT_LT((h.row(1) - Eigen::RowVector3d(0, 1, 0)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((h.row(3) - Eigen::RowVector3d::Constant(1.0 / 3.0)).cwiseAbs().maxCoeff(), 1e-15);
  for (int i = 0; i < h.rows(); ++i) EXPECT_NEAR(h.row(i).sum(), 1.0, 1e-12);
  const std::vector<Vec3> off{leaders[0], leaders[1], leaders[2], {1, 1, 1.5}};
  try {
    leader_coefficients(off, leaders, 2);
    FAIL() << "expected OffHyperplaneError";
  } catch (const OffHyperplaneError& e) {
    EXPECT_EQ(e.agent(), 3);
  }
  const std::vector<Vec3> line{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  EXPECT_THROW(leader_coefficients(line, line, 2), DegenerateSimplexError);
}

TEST(LeaderCoefficients, ReconstructsRandomFormations) {
  for (int trial = 0; trial < 50; ++trial) {
    const auto f = oracle::random_planar_formation(rng, 15);
    std::vector<Vec3> lp{f.positions[0], f.positions[1], f.positions[2]};
    const Eigen::MatrixXd h = leader_coefficients(f.positions, lp, 2);
    for (int i = 0; i < h.rows(); ++i) {
      Vec3 r = Vec3::Zero();
      for (int j = 0; j < 3; ++j) r += h(i, j) * lp[j];
      EXPECT_LT((r - f.positions[i]).norm(), 1e-9);
      EXPECT_NEAR(h.row(i).sum(), 1.0, 1e-12);
    }
  }
}

TEST(GlobalDesiredPosition, Examples) {
  const Vec3 d0(1, 2, 3), r0(4, -1, 2);
  EXPECT_LT((global_desired_position<double>(Mat3::Identity(), d0, d0, r0) - r0).norm(), 1e-15);
  Mat3 q;
  q << 1, 2, 3, 4, 5, 6, 7, 8, 10;
  const Vec3 d(9, 8, 7);
  EXPECT_LT((global_desired_position<double>(q, d, d0, d0) - d).norm(), 1e-15);
  EXPECT_LT((global_desired_position<double>(2.0 * Mat3::Identity(), Vec3(1, 0, 0), Vec3::Zero(), Vec3(1, 1, 0)) -
             Vec3(3, 2, 0))
                .norm(),
            1e-15);
}
