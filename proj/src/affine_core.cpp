#include "affine_swarm/affine_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "affine_swarm/errors.hpp"

namespace affine_swarm {

namespace {

constexpr double kRankTolerance = 1e-9;
constexpr double kSignTolerance = 1e-12;

void check_simplex_size(std::span<const Vec3> points, int n) {
  if (n < 1 || n > 3) throw InvalidArgument("simplex dimension must be 1, 2 or 3");
  if (static_cast<int>(points.size()) != n + 1) {
    throw InvalidArgument("an " + std::to_string(n) + "-simplex needs " + std::to_string(n + 1) +
                          " vertices, got " + std::to_string(points.size()));
  }
}

Eigen::Matrix<double, 3, Eigen::Dynamic> edge_matrix(std::span<const Vec3> points, int n) {
  Eigen::Matrix<double, 3, Eigen::Dynamic> edges(3, n);
  for (int k = 0; k < n; ++k) edges.col(k) = points[k + 1] - points[0];
  return edges;
}

}  // namespace

int rank_fn(std::span<const Vec3> points, int n) {
  check_simplex_size(points, n);
  const auto edges = edge_matrix(points, n);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(edges);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv[0] <= 0.0) return 0;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i) {
    if (sv[i] > kRankTolerance * sv[0]) ++rank;
  }
  return rank;
}

AffineFrame::AffineFrame(std::span<const Vec3> simplex, int n) : origin_(simplex.front()), basis_(3, n) {
  if (rank_fn(simplex, n) != n) {
    throw DegenerateSimplexError("points do not span a " + std::to_string(n) + "-simplex");
  }
  // Modified Gram-Schmidt; the rank check above guarantees non-zero residuals.
  for (int k = 0; k < n; ++k) {
    Vec3 v = simplex[k + 1] - origin_;
    for (int j = 0; j < k; ++j) v -= basis_.col(j).dot(v) * basis_.col(j);
    basis_.col(k) = v.normalized();
  }
}

Eigen::VectorXd AffineFrame::coordinates(const Vec3& p) const {
  return basis_.transpose() * (p - origin_);
}

double AffineFrame::off_plane_distance(const Vec3& p) const {
  const Vec3 rel = p - origin_;
  return (rel - basis_ * (basis_.transpose() * rel)).norm();
}

int containment_sign_sum(std::span<const Eigen::VectorXd> vertices, const Eigen::VectorXd& c) {
  const int m = static_cast<int>(vertices.size());
  Eigen::MatrixXd d(m, m);
  for (int k = 0; k < m; ++k) {
    d.col(k).head(m - 1) = vertices[k];
    d(m - 1, k) = 1.0;
  }
  const double full = d.determinant();
  if (full == 0.0) throw DegenerateSimplexError("containment test on a degenerate simplex");
  const double cutoff = kSignTolerance * std::abs(full);
  int sum = 0;
  for (int i = 0; i < m; ++i) {
    Eigen::MatrixXd di = d;
    di.col(i).head(m - 1) = c;
    const double det = di.determinant();
    if (det > cutoff) {
      ++sum;
    } else if (det < -cutoff) {
      --sum;
    }
  }
  return sum;
}

int containment_fn(std::span<const Vec3> points, const Vec3& c, int n) {
  check_simplex_size(points, n);
  if (rank_fn(points, n) != n) {
    throw DegenerateSimplexError("containment test on a degenerate simplex");
  }
  std::vector<Eigen::VectorXd> coords;
  coords.reserve(points.size());
  if (n == 3) {
    for (const auto& p : points) coords.emplace_back(p);
    return containment_sign_sum(coords, c);
  }
  const AffineFrame frame(points, n);
  for (const auto& p : points) coords.push_back(frame.coordinates(p));
  return containment_sign_sum(coords, frame.coordinates(c));
}

Eigen::VectorXd barycentric_coordinates(std::span<const Vec3> simplex, const Vec3& p, int n) {
  check_simplex_size(simplex, n);
  const AffineFrame frame(simplex, n);
  Eigen::MatrixXd edges(n, n);
  for (int k = 0; k < n; ++k) edges.col(k) = frame.coordinates(simplex[k + 1]);
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(edges);
  if (!lu.isInvertible()) throw DegenerateSimplexError("singular edge matrix");
  const Eigen::VectorXd tail = lu.solve(frame.coordinates(p));
  Eigen::VectorXd w(n + 1);
  w.tail(n) = tail;
  w[0] = 1.0 - tail.sum();
  return w;
}

Eigen::MatrixXd leader_coefficients(std::span<const Vec3> positions,
                                    std::span<const Vec3> leader_positions, int n) {
  check_simplex_size(leader_positions, n);
  const AffineFrame frame(leader_positions, n);

  double extent = 0.0;
  for (const auto& p : positions) extent = std::max(extent, (p - frame.origin()).norm());
  for (const auto& p : leader_positions) extent = std::max(extent, (p - frame.origin()).norm());
  const double tolerance = 1e-6 * extent;

  Eigen::MatrixXd edges(n, n);
  for (int k = 0; k < n; ++k) edges.col(k) = frame.coordinates(leader_positions[k + 1]);
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(edges);

  Eigen::MatrixXd h(static_cast<Eigen::Index>(positions.size()), n + 1);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const double off = frame.off_plane_distance(positions[i]);
    if (off > tolerance) throw OffHyperplaneError(static_cast<int>(i), off);
    const Eigen::VectorXd tail = lu.solve(frame.coordinates(positions[i]));
    h(static_cast<Eigen::Index>(i), 0) = 1.0 - tail.sum();
    h.row(static_cast<Eigen::Index>(i)).tail(n) = tail.transpose();
  }
  return h;
}

}  // namespace affine_swarm
