#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "affine_swarm/affine_core.hpp"

namespace affine_swarm {

/// Initial formation with role assignment. Agent ids index `positions`.
struct Formation {
  int dimension = 2;
  std::vector<Vec3> positions;
  std::vector<int> leaders;   // n + 1 ids, order defines the leader columns of H
  std::vector<int> boundary;  // contains every leader
  std::vector<int> interior;

  int size() const { return static_cast<int>(positions.size()); }
  std::vector<Vec3> leader_positions() const;
  bool is_leader(int id) const;
};

struct RoleSets {
  std::vector<int> boundary;
  std::vector<int> interior;
};

/**
 * @brief Splits agents into convex-hull (boundary) and interior sets.
 *
 * Hull membership is decided in the leaders' hyperplane frame with a 1e-9
 * relative area tolerance; points on hull edges/faces count as boundary.
 * Throws if a leader is not on the hull or fewer than n + 1 agents are.
 */
RoleSets classify_roles(std::span<const Vec3> positions, int n, std::span<const int> leaders);

struct ProximityAssignment {
  std::vector<int> in_neighbors;  // ascending ids
  double radius = 0.0;            // minimal proximity radius l*
  int containing_simplices = 0;   // |W_i(l*)|
};

/**
 * @brief Minimal-radius containing simplex for an interior agent.
 *
 * Candidate radii are the sorted distances to all other agents. At the first
 * radius admitting a simplex that strictly contains the agent, the
 * lexicographically smallest vertex-id tuple is returned. Throws
 * NotFoundError when no other n + 1 agents strictly contain it.
 */
ProximityAssignment proximity_in_neighbors(int agent, const Formation& formation);

/// Barycentric communication weights of `agent` over its in-neighbours.
Eigen::VectorXd communication_weights(int agent, std::span<const int> in_neighbors,
                                      std::span<const Vec3> positions, int n);

struct CommTopology {
  int dimension = 2;
  std::vector<int> leaders;
  std::vector<int> followers;                  // ascending ids
  std::vector<std::vector<int>> in_neighbors;  // per agent; empty for leaders
  std::vector<Eigen::VectorXd> weights;        // per agent; aligned with in_neighbors
  std::vector<double> proximity_radius;        // l* for interior agents, 0 otherwise
  Eigen::MatrixXd W;
  Eigen::MatrixXd L;   // -I + W
  Eigen::MatrixXd L0;  // N x (n+1) leader selector

  int size() const { return static_cast<int>(W.rows()); }
  /// Follower-by-leader block of W.
  Eigen::MatrixXd F() const;
  /// Follower-by-follower block of W.
  Eigen::MatrixXd G() const;
};

/// Builds W, L and L0 from per-agent in-neighbours and weights.
CommTopology assemble_matrices(const Formation& formation,
                               std::vector<std::vector<int>> in_neighbors,
                               std::vector<Eigen::VectorXd> weights,
                               std::vector<double> proximity_radius = {});

/**
 * @brief Full topology construction: non-leader boundary agents listen to the
 * leaders, interior agents to their proximity simplex.
 */
CommTopology build_topology(const Formation& formation);

struct StabilityReport {
  double rho_g = 0.0;
  Eigen::VectorXcd l_eigenvalues;
  double max_real_eigenvalue = 0.0;
  bool hurwitz = false;
  bool g_nonnegative = true;
  std::vector<int> negative_weight_agents;
};

/// Spectral radius of G and the spectrum of L; Hurwitz means max Re < -1e-9.
StabilityReport certify_stability(const CommTopology& topology);

/// H = -L^{-1} L0. Throws if L is singular.
Eigen::MatrixXd compute_H(const CommTopology& topology);

/// JSON audit of in-neighbours, weights, rho(G), eig(L) and the Hurwitz flag.
std::string topology_audit_json(const CommTopology& topology, const StabilityReport& report);

}  // namespace affine_swarm
