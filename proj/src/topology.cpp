#include "affine_swarm/topology.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "affine_swarm/errors.hpp"
#include "json.hpp"

namespace affine_swarm {

namespace {

constexpr double kHullTolerance = 1e-9;
constexpr double kDegenerateTolerance = 1e-9;
constexpr double kHurwitzMargin = 1e-9;

double formation_scale(std::span<const Vec3> positions, const Vec3& origin) {
  double scale = 0.0;
  for (const auto& p : positions) scale = std::max(scale, (p - origin).norm());
  return scale > 0.0 ? scale : 1.0;
}

// Coordinates of every agent in the leaders' hyperplane frame (raw for n = 3).
std::vector<Eigen::VectorXd> hyperplane_coordinates(std::span<const Vec3> positions,
                                                    std::span<const Vec3> leader_positions,
                                                    int n) {
  const AffineFrame frame(leader_positions, n);
  const double tolerance = 1e-6 * formation_scale(positions, frame.origin());
  std::vector<Eigen::VectorXd> coords;
  coords.reserve(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const double off = frame.off_plane_distance(positions[i]);
    if (off > tolerance) throw OffHyperplaneError(static_cast<int>(i), off);
    if (n == 3) {
      coords.emplace_back(positions[i]);
    } else {
      coords.push_back(frame.coordinates(positions[i]));
    }
  }
  return coords;
}

double cross2(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a[0] * b[1] - a[1] * b[0]; }

// True when c lies strictly inside the simplex spanned by `vertices` and the
// simplex is not numerically flat.
bool strictly_contains(const std::vector<Eigen::VectorXd>& vertices, const Eigen::VectorXd& c) {
  const int n = static_cast<int>(vertices.size()) - 1;
  Eigen::MatrixXd edges(n, n);
  double edge_product = 1.0;
  for (int k = 0; k < n; ++k) {
    edges.col(k) = vertices[k + 1] - vertices[0];
    edge_product *= edges.col(k).norm();
  }
  if (edge_product == 0.0) return false;
  if (std::abs(edges.determinant()) <= kDegenerateTolerance * edge_product) return false;
  return std::abs(containment_sign_sum(vertices, c)) == n + 1;
}

// Advances `idx` to the next lexicographic m-combination of {0..k-1}.
bool next_combination(std::vector<int>& idx, int k) {
  const int m = static_cast<int>(idx.size());
  int i = m - 1;
  while (i >= 0 && idx[i] == k - m + i) --i;
  if (i < 0) return false;
  ++idx[i];
  for (int j = i + 1; j < m; ++j) idx[j] = idx[j - 1] + 1;
  return true;
}

}  // namespace

std::vector<Vec3> Formation::leader_positions() const {
  std::vector<Vec3> out;
  out.reserve(leaders.size());
  for (int id : leaders) out.push_back(positions.at(id));
  return out;
}

bool Formation::is_leader(int id) const {
  return std::find(leaders.begin(), leaders.end(), id) != leaders.end();
}

RoleSets classify_roles(std::span<const Vec3> positions, int n, std::span<const int> leaders) {
  if (static_cast<int>(leaders.size()) != n + 1) {
    throw InvalidArgument("expected " + std::to_string(n + 1) + " leaders, got " +
                          std::to_string(leaders.size()));
  }
  const int count = static_cast<int>(positions.size());
  std::vector<Vec3> leader_pos;
  for (int id : leaders) {
    if (id < 0 || id >= count) throw InvalidArgument("leader id " + std::to_string(id) + " out of range");
    leader_pos.push_back(positions[id]);
  }
  const auto coords = hyperplane_coordinates(positions, leader_pos, n);
  Eigen::VectorXd centre = Eigen::VectorXd::Zero(n);
  for (const auto& c : coords) centre += c;
  centre /= count;
  double scale = 0.0;
  for (const auto& c : coords) scale = std::max(scale, (c - centre).norm());
  if (scale == 0.0) scale = 1.0;

  std::vector<char> on_hull(count, 0);
  if (n == 1) {
    double lo = coords[0][0], hi = coords[0][0];
    for (const auto& c : coords) {
      lo = std::min(lo, c[0]);
      hi = std::max(hi, c[0]);
    }
    const double tol = kHullTolerance * scale;
    for (int k = 0; k < count; ++k) {
      on_hull[k] = (std::abs(coords[k][0] - lo) <= tol || std::abs(coords[k][0] - hi) <= tol);
    }
  } else if (n == 2) {
    const double tol = kHullTolerance * scale * scale;
    for (int i = 0; i < count; ++i) {
      for (int j = i + 1; j < count; ++j) {
        const Eigen::VectorXd edge = coords[j] - coords[i];
        if (edge.norm() <= kHullTolerance * scale) continue;
        bool any_pos = false, any_neg = false;
        for (int k = 0; k < count && !(any_pos && any_neg); ++k) {
          const double a = cross2(edge, coords[k] - coords[i]);
          any_pos |= a > tol;
          any_neg |= a < -tol;
        }
        if (any_pos && any_neg) continue;
        for (int k = 0; k < count; ++k) {
          if (std::abs(cross2(edge, coords[k] - coords[i])) <= tol) on_hull[k] = 1;
        }
      }
    }
  } else {
    const double tol = kHullTolerance * scale * scale * scale;
    for (int i = 0; i < count; ++i) {
      for (int j = i + 1; j < count; ++j) {
        for (int l = j + 1; l < count; ++l) {
          const Vec3 a = coords[j] - coords[i];
          const Vec3 b = coords[l] - coords[i];
          const Vec3 normal = a.cross(b);
          if (normal.norm() <= kHullTolerance * scale * scale) continue;
          bool any_pos = false, any_neg = false;
          for (int k = 0; k < count && !(any_pos && any_neg); ++k) {
            const double s = normal.dot(Vec3(coords[k] - coords[i]));
            any_pos |= s > tol;
            any_neg |= s < -tol;
          }
          if (any_pos && any_neg) continue;
          for (int k = 0; k < count; ++k) {
            if (std::abs(normal.dot(Vec3(coords[k] - coords[i]))) <= tol) on_hull[k] = 1;
          }
        }
      }
    }
  }

  RoleSets roles;
  for (int k = 0; k < count; ++k) (on_hull[k] ? roles.boundary : roles.interior).push_back(k);
  for (int id : leaders) {
    if (!on_hull[id]) throw InvalidArgument("leader " + std::to_string(id) + " is not on the convex hull");
  }
  return roles;
}

ProximityAssignment proximity_in_neighbors(int agent, const Formation& formation) {
  const int count = formation.size();
  const int n = formation.dimension;
  if (agent < 0 || agent >= count) throw InvalidArgument("agent id out of range");
  const auto coords = hyperplane_coordinates(formation.positions, formation.leader_positions(), n);
  const double scale = formation_scale(formation.positions, formation.positions[agent]);

  std::vector<int> order;
  for (int j = 0; j < count; ++j) {
    if (j != agent) order.push_back(j);
  }
  std::vector<double> dist(count, 0.0);
  for (int j : order) dist[j] = (formation.positions[j] - formation.positions[agent]).norm();
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return dist[a] < dist[b]; });

  const int m = n + 1;
  const double merge = 1e-12 * scale;
  int tested = 0;  // combos whose members all lie in order[0..tested) were already rejected
  std::size_t k = 0;
  while (k < order.size()) {
    // Extend to the end of the current group of equal distances.
    const double radius = dist[order[k]];
    while (k < order.size() && dist[order[k]] <= radius + merge) ++k;
    const int within = static_cast<int>(k);
    if (within < m) continue;

    std::vector<std::vector<int>> hits;
    std::vector<int> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<Eigen::VectorXd> simplex(m);
    do {
      if (idx.back() < tested) continue;
      for (int v = 0; v < m; ++v) simplex[v] = coords[order[idx[v]]];
      if (strictly_contains(simplex, coords[agent])) {
        std::vector<int> ids(m);
        for (int v = 0; v < m; ++v) ids[v] = order[idx[v]];
        std::sort(ids.begin(), ids.end());
        hits.push_back(std::move(ids));
      }
    } while (next_combination(idx, within));
    tested = within;

    if (!hits.empty()) {
      ProximityAssignment out;
      out.in_neighbors = *std::min_element(hits.begin(), hits.end());
      out.radius = radius;
      out.containing_simplices = static_cast<int>(hits.size());
      return out;
    }
  }
  throw NotFoundError("agent " + std::to_string(agent) +
                      " is not strictly inside any simplex of other agents");
}

Eigen::VectorXd communication_weights(int agent, std::span<const int> in_neighbors,
                                      std::span<const Vec3> positions, int n) {
  if (static_cast<int>(in_neighbors.size()) != n + 1) {
    throw InvalidArgument("agent " + std::to_string(agent) + " needs " + std::to_string(n + 1) +
                          " in-neighbours");
  }
  std::vector<Vec3> simplex;
  for (int id : in_neighbors) simplex.push_back(positions[id]);
  return barycentric_coordinates(simplex, positions[agent], n);
}

Eigen::MatrixXd CommTopology::F() const {
  Eigen::MatrixXd f(followers.size(), leaders.size());
  for (std::size_t r = 0; r < followers.size(); ++r) {
    for (std::size_t c = 0; c < leaders.size(); ++c) f(r, c) = W(followers[r], leaders[c]);
  }
  return f;
}

Eigen::MatrixXd CommTopology::G() const {
  Eigen::MatrixXd g(followers.size(), followers.size());
  for (std::size_t r = 0; r < followers.size(); ++r) {
    for (std::size_t c = 0; c < followers.size(); ++c) g(r, c) = W(followers[r], followers[c]);
  }
  return g;
}

CommTopology assemble_matrices(const Formation& formation,
                               std::vector<std::vector<int>> in_neighbors,
                               std::vector<Eigen::VectorXd> weights,
                               std::vector<double> proximity_radius) {
  const int count = formation.size();
  if (static_cast<int>(in_neighbors.size()) != count || static_cast<int>(weights.size()) != count) {
    throw InvalidArgument("in-neighbour and weight lists must cover every agent");
  }
  CommTopology topo;
  topo.dimension = formation.dimension;
  topo.leaders = formation.leaders;
  for (int i = 0; i < count; ++i) {
    if (!formation.is_leader(i)) topo.followers.push_back(i);
  }
  topo.W = Eigen::MatrixXd::Zero(count, count);
  for (int i = 0; i < count; ++i) {
    if (formation.is_leader(i)) continue;
    if (in_neighbors[i].size() != static_cast<std::size_t>(weights[i].size())) {
      throw InvalidArgument("agent " + std::to_string(i) + ": weight count mismatch");
    }
    for (std::size_t k = 0; k < in_neighbors[i].size(); ++k) {
      topo.W(i, in_neighbors[i][k]) += weights[i][static_cast<Eigen::Index>(k)];
    }
  }
  topo.L = topo.W - Eigen::MatrixXd::Identity(count, count);
  topo.L0 = Eigen::MatrixXd::Zero(count, static_cast<Eigen::Index>(formation.leaders.size()));
  for (std::size_t k = 0; k < formation.leaders.size(); ++k) {
    topo.L0(formation.leaders[k], static_cast<Eigen::Index>(k)) = 1.0;
  }
  if (proximity_radius.empty()) proximity_radius.assign(count, 0.0);
  topo.in_neighbors = std::move(in_neighbors);
  topo.weights = std::move(weights);
  topo.proximity_radius = std::move(proximity_radius);
  return topo;
}

CommTopology build_topology(const Formation& input) {
  Formation formation = input;
  if (formation.boundary.empty() && formation.interior.empty()) {
    auto roles = classify_roles(formation.positions, formation.dimension, formation.leaders);
    formation.boundary = std::move(roles.boundary);
    formation.interior = std::move(roles.interior);
  }
  const int count = formation.size();
  std::vector<std::vector<int>> in_neighbors(count);
  std::vector<Eigen::VectorXd> weights(count);
  std::vector<double> radius(count, 0.0);
  const auto in_boundary = [&](int i) {
    return std::find(formation.boundary.begin(), formation.boundary.end(), i) != formation.boundary.end();
  };
  for (int i = 0; i < count; ++i) {
    if (formation.is_leader(i)) continue;
    if (in_boundary(i)) {
      in_neighbors[i] = formation.leaders;
    } else {
      const auto assignment = proximity_in_neighbors(i, formation);
      in_neighbors[i] = assignment.in_neighbors;
      radius[i] = assignment.radius;
    }
    weights[i] = communication_weights(i, in_neighbors[i], formation.positions, formation.dimension);
  }
  return assemble_matrices(formation, std::move(in_neighbors), std::move(weights), std::move(radius));
}

StabilityReport certify_stability(const CommTopology& topology) {
  StabilityReport report;
  const Eigen::MatrixXd g = topology.G();
  if (g.size() > 0) {
    const Eigen::EigenSolver<Eigen::MatrixXd> es(g, false);
    report.rho_g = es.eigenvalues().cwiseAbs().maxCoeff();
    report.g_nonnegative = g.minCoeff() >= 0.0;
  }
  for (int i : topology.followers) {
    if (topology.weights[i].size() > 0 && topology.weights[i].minCoeff() < 0.0) {
      report.negative_weight_agents.push_back(i);
    }
  }
  const Eigen::EigenSolver<Eigen::MatrixXd> es(topology.L, false);
  report.l_eigenvalues = es.eigenvalues();
  report.max_real_eigenvalue = report.l_eigenvalues.real().maxCoeff();
  report.hurwitz = report.max_real_eigenvalue < -kHurwitzMargin;
  return report;
}

Eigen::MatrixXd compute_H(const CommTopology& topology) {
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(topology.L);
  if (!lu.isInvertible()) throw InvalidArgument("L is singular");
  return -lu.solve(topology.L0);
}

std::string topology_audit_json(const CommTopology& topology, const StabilityReport& report) {
  nlohmann::ordered_json doc;
  doc["dimension"] = topology.dimension;
  doc["leaders"] = topology.leaders;
  auto& followers = doc["followers"] = nlohmann::ordered_json::array();
  for (int i : topology.followers) {
    nlohmann::ordered_json f;
    f["id"] = i;
    f["in_neighbors"] = topology.in_neighbors[i];
    f["weights"] = std::vector<double>(topology.weights[i].data(),
                                       topology.weights[i].data() + topology.weights[i].size());
    if (topology.proximity_radius[i] > 0.0) f["proximity_radius"] = topology.proximity_radius[i];
    followers.push_back(std::move(f));
  }
  doc["rho_G"] = report.rho_g;
  doc["G_nonnegative"] = report.g_nonnegative;
  doc["negative_weight_agents"] = report.negative_weight_agents;
  auto& eigs = doc["L_eigenvalues"] = nlohmann::ordered_json::array();
  for (Eigen::Index k = 0; k < report.l_eigenvalues.size(); ++k) {
    eigs.push_back({report.l_eigenvalues[k].real(), report.l_eigenvalues[k].imag()});
  }
  doc["max_real_eigenvalue"] = report.max_real_eigenvalue;
  doc["hurwitz"] = report.hurwitz;
  return doc.dump(2);
}

}  // namespace affine_swarm
