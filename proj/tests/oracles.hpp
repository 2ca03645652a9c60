#pragma once

// Independent reference implementations used only by the tests. None of them
// calls into the library code they check.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Vec3 = Eigen::Vector3d;

/// Barycentric coordinates of p w.r.t. an n-simplex by least squares on the
/// edge matrix; returns nullopt for a numerically degenerate simplex.
inline std::optional<Eigen::VectorXd> barycentric(const std::vector<Vec3>& simplex, const Vec3& p) {
  const int n = static_cast<int>(simplex.size()) - 1;
  Eigen::MatrixXd e(3, n);
  for (int k = 0; k < n; ++k) e.col(k) = simplex[k + 1] - simplex[0];
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(e);
  if (qr.rank() < n) return std::nullopt;
  const Eigen::VectorXd x = qr.solve(p - simplex[0]);
  Eigen::VectorXd b(n + 1);
  b[0] = 1.0 - x.sum();
  b.tail(n) = x;
  return b;
}

/// Distance from p (assumed in the simplex's affine hull) to the nearest facet
/// hyperplane within the hull.
inline double facet_distance(const std::vector<Vec3>& simplex, const Vec3& p) {
  const int n = static_cast<int>(simplex.size()) - 1;
  double best = std::numeric_limits<double>::infinity();
  if (n == 1) {
    for (const auto& v : simplex) best = std::min(best, (p - v).norm());
    return best;
  }
  for (int skip = 0; skip <= n; ++skip) {
    std::vector<Vec3> facet;
    for (int k = 0; k <= n; ++k) {
      if (k != skip) facet.push_back(simplex[k]);
    }
    double d = 0.0;
    if (n == 2) {
      const Vec3 u = (facet[1] - facet[0]).normalized();
      const Vec3 w = p - facet[0];
      d = (w - w.dot(u) * u).norm();
    } else {
      const Vec3 nrm = (facet[1] - facet[0]).cross(facet[2] - facet[0]).normalized();
      d = std::abs((p - facet[0]).dot(nrm));
    }
    best = std::min(best, d);
  }
  return best;
}

/// Points within roundoff of a facet count as on it, not inside.
inline bool strictly_inside(const std::vector<Vec3>& simplex, const Vec3& p) {
  const auto b = barycentric(simplex, p);
  return b && b->minCoeff() > 1e-12;
}

/// Plain Dijkstra on a 26-connected grid with Euclidean step costs (cells).
inline double dijkstra_cost(const std::array<int, 3>& dims, const std::vector<std::uint8_t>& blocked,
                            const std::array<int, 3>& start, const std::array<int, 3>& goal) {
  const auto index = [&](int x, int y, int z) {
    return static_cast<std::size_t>(x) + static_cast<std::size_t>(dims[0]) * (y + static_cast<std::size_t>(dims[1]) * z);
  };
  std::vector<double> dist(blocked.size(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  const std::size_t s = index(start[0], start[1], start[2]);
  const std::size_t g = index(goal[0], goal[1], goal[2]);
  if (blocked[s] || blocked[g]) return std::numeric_limits<double>::infinity();
  dist[s] = 0.0;
  pq.push({0.0, s});
  const std::size_t plane = static_cast<std::size_t>(dims[0]) * dims[1];
  while (!pq.empty()) {
    const auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[u]) continue;
    if (u == g) return d;
    const int z = static_cast<int>(u / plane);
    const int y = static_cast<int>((u % plane) / dims[0]);
    const int x = static_cast<int>(u % dims[0]);
    for (int dz = -1; dz <= 1; ++dz) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (!dx && !dy && !dz) continue;
          const int nx = x + dx, ny = y + dy, nz = z + dz;
          if (nx < 0 || ny < 0 || nz < 0 || nx >= dims[0] || ny >= dims[1] || nz >= dims[2]) continue;
          const std::size_t v = index(nx, ny, nz);
          if (blocked[v]) continue;
          const double nd = d + std::sqrt(static_cast<double>(dx * dx + dy * dy + dz * dz));
          if (nd < dist[v]) {
            dist[v] = nd;
            pq.push({nd, v});
          }
        }
      }
    }
  }
  return std::numeric_limits<double>::infinity();
}

/// Smallest proximity radius and the lexicographically first containing
/// simplex within it, by enumerating every (n+1)-subset of the other agents.
struct ProximityResult {
  double radius = std::numeric_limits<double>::infinity();
  std::vector<int> ids;
};

inline ProximityResult exhaustive_proximity(int agent, const std::vector<Vec3>& pos, int n) {
  const int count = static_cast<int>(pos.size());
  std::vector<int> others;
  for (int j = 0; j < count; ++j) {
    if (j != agent) others.push_back(j);
  }
  struct Cand {
    double radius;
    std::vector<int> ids;
  };
  std::vector<Cand> cands;
  std::vector<int> pick(n + 1);
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == n + 1) {
      std::vector<Vec3> simplex;
      double r = 0.0;
      for (int id : pick) {
        simplex.push_back(pos[id]);
        r = std::max(r, (pos[id] - pos[agent]).norm());
      }
      // Skip near-degenerate simplices the same way a careful user would.
      Eigen::MatrixXd e(3, n);
      for (int k = 0; k < n; ++k) e.col(k) = simplex[k + 1] - simplex[0];
      const Eigen::JacobiSVD<Eigen::MatrixXd> svd(e);
      const auto sv = svd.singularValues();
      if (sv[n - 1] <= 1e-7 * sv[0]) return;
      if (strictly_inside(simplex, pos[agent])) cands.push_back({r, pick});
      return;
    }
    for (std::size_t k = start; k < others.size(); ++k) {
      pick[depth] = others[k];
      rec(static_cast<int>(k) + 1, depth + 1);
    }
  };
  rec(0, 0);
  ProximityResult out;
  for (const auto& c : cands) out.radius = std::min(out.radius, c.radius);
  for (const auto& c : cands) {
    if (c.radius <= out.radius * (1.0 + 1e-12) && (out.ids.empty() || c.ids < out.ids)) out.ids = c.ids;
  }
  return out;
}

/// Second implementation of the extended quadcopter model: body-to-inertial
/// rotation built from axis-angle factors Rz(psi) Ry(theta) Rx(phi); Euler
/// rates from the basis-vector identity for body rates.
struct NewtonEuler {
  double mass;
  Eigen::Matrix3d inertia;
  double gravity;

  Eigen::Matrix3d body_to_world(const Vec3& eul) const {
    return (Eigen::AngleAxisd(eul[2], Vec3::UnitZ()) * Eigen::AngleAxisd(eul[1], Vec3::UnitY()) *
            Eigen::AngleAxisd(eul[0], Vec3::UnitX()))
        .toRotationMatrix();
  }

  // Columns map (phi', theta', psi') to body rates.
  Eigen::Matrix3d rate_map(const Vec3& eul) const {
    const Eigen::Matrix3d rx = Eigen::AngleAxisd(eul[0], Vec3::UnitX()).toRotationMatrix();
    const Eigen::Matrix3d ry = Eigen::AngleAxisd(eul[1], Vec3::UnitY()).toRotationMatrix();
    Eigen::Matrix3d e;
    e.col(0) = Vec3::UnitX();
    e.col(1) = rx.transpose() * Vec3::UnitY();
    e.col(2) = rx.transpose() * ry.transpose() * Vec3::UnitZ();
    return e;
  }

  // x = [r, v, euler, omega, p, p_dot]; u = [u_p, tau].
  Eigen::Matrix<double, 14, 1> derivative(const Eigen::Matrix<double, 14, 1>& x, const Eigen::Vector4d& u) const {
    const Vec3 v = x.segment<3>(3), eul = x.segment<3>(6), w = x.segment<3>(9);
    const double p = x[12], pd = x[13];
    Eigen::Matrix<double, 14, 1> dx;
    dx.segment<3>(0) = v;
    dx.segment<3>(3) = p / mass * body_to_world(eul).col(2) - gravity * Vec3::UnitZ();
    dx.segment<3>(6) = rate_map(eul).lu().solve(w);
    dx.segment<3>(9) = inertia.lu().solve(u.tail<3>() - w.cross(inertia * w));
    dx[12] = pd;
    dx[13] = u[0];
    return dx;
  }
};

/// Roots of a real monic quartic via the companion matrix (independent of the
/// library's complex companion solver: real EigenSolver here).
inline Eigen::Vector4cd quartic_roots(double a3, double a2, double a1, double a0) {
  Eigen::Matrix4d c = Eigen::Matrix4d::Zero();
  c(0, 0) = -a3;
  c(0, 1) = -a2;
  c(0, 2) = -a1;
  c(0, 3) = -a0;
  c(1, 0) = c(2, 1) = c(3, 2) = 1.0;
  return Eigen::EigenSolver<Eigen::Matrix4d>(c, false).eigenvalues();
}

/// Random planar formation: three leaders on a large triangle in a random
/// plane, followers strictly inside it with a minimum spacing.
struct PlanarFormation {
  std::vector<Vec3> positions;
  std::vector<int> leaders{0, 1, 2};
};

inline PlanarFormation random_planar_formation(std::mt19937_64& rng, int count) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec3 a = Vec3(u(rng), u(rng), u(rng)).normalized();
  Vec3 b = Vec3(u(rng), u(rng), u(rng));
  b = (b - b.dot(a) * a).normalized();
  const Vec3 origin(10 * u(rng), 10 * u(rng), 10 * u(rng));
  const auto at = [&](double s, double t) { return Vec3(origin + s * a + t * b); };
  PlanarFormation f;
  const double scale = 10.0;
  const std::array<Eigen::Vector2d, 3> tri{Eigen::Vector2d(-scale, -scale * 0.6), Eigen::Vector2d(scale, -scale * 0.5),
                                           Eigen::Vector2d(0.1 * scale, scale)};
  std::vector<Eigen::Vector2d> pts(tri.begin(), tri.end());
  std::uniform_real_distribution<double> w(0.0, 1.0);
  while (static_cast<int>(pts.size()) < count) {
    double l1 = w(rng), l2 = w(rng);
    if (l1 + l2 >= 1.0) continue;
    const double l0 = 1.0 - l1 - l2;
    if (std::min({l0, l1, l2}) < 0.03) continue;
    const Eigen::Vector2d p = l0 * tri[0] + l1 * tri[1] + l2 * tri[2];
    bool ok = true;
    for (const auto& q : pts) ok = ok && (p - q).norm() > 0.6;
    if (ok) pts.push_back(p);
  }
  for (const auto& p : pts) f.positions.push_back(at(p[0], p[1]));
  return f;
}

}  // namespace oracle
