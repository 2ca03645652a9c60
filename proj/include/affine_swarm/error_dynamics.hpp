#pragma once

#include <complex>
#include <vector>

#include <Eigen/Core>

#include "affine_swarm/planner.hpp"
#include "affine_swarm/topology.hpp"
#include "affine_swarm/vehicle.hpp"

namespace affine_swarm {

struct GainReport {
  bool routh_stable = false;
  bool roots_stable = false;
  Eigen::Vector4cd roots;
  double max_real_root = 0.0;
  bool agree() const { return routh_stable == roots_stable; }
  bool stable() const { return routh_stable && roots_stable; }
};

/// Routh-Hurwitz verdict for s^4 + k1 s^3 + k2 s^2 + k3 s + k4.
bool routh_hurwitz_stable(const Gains& gains);

/// Roots of the quartic, from the companion-matrix eigenvalues.
Eigen::Vector4cd characteristic_roots(const Gains& gains);

/// Both verdicts; roots count as stable when Re < -1e-9.
GainReport check_gain_stability(const Gains& gains);

/// Every agent's quartic; false if any is not stable.
bool check_gain_stability(const std::vector<Gains>& gains, std::vector<GainReport>* reports = nullptr);

/**
 * @brief Linear tracking-error model of the whole swarm.
 *
 * Per axis the state is [e; e'; e''; e'''] (4N entries) with
 * e'''' = K4 L e + K3 L e' + K2 L e'' + K1 L e''' - H r_L''''.
 * The three axes share the same matrix, so A_MQS is block diagonal.
 */
class ErrorSystem {
 public:
  ErrorSystem(const CommTopology& topology, std::vector<Gains> gains);

  int agents() const { return static_cast<int>(L_.rows()); }
  const Eigen::MatrixXd& L() const { return L_; }
  const Eigen::MatrixXd& H() const { return H_; }
  const std::vector<int>& leaders() const { return leaders_; }
  const std::vector<Gains>& gains() const { return gains_; }
  bool uniform_gains() const;

  /// 4N x 4N matrix of one axis.
  const Eigen::MatrixXd& axis_matrix() const { return A_axis_; }
  /// 12N x 12N block-diagonal matrix over x, y, z.
  Eigen::MatrixXd a_mqs() const;

  /**
   * @brief Eigenvalues of one axis block (A_MQS repeats them per axis).
   *
   * With uniform gains these are the roots of
   * s^4 - l (k1 s^3 + k2 s^2 + k3 s + k4) for every eigenvalue l of L;
   * otherwise a dense eigensolve is used.
   */
  Eigen::VectorXcd spectrum() const;
  Eigen::VectorXcd dense_spectrum() const;
  Eigen::VectorXcd structured_spectrum() const;

 private:
  Eigen::MatrixXd L_;
  Eigen::MatrixXd H_;
  std::vector<int> leaders_;
  std::vector<Gains> gains_;
  Eigen::MatrixXd A_axis_;
};

enum class ErrorInitial {
  AtRest,  // agents hover on the formation: E''' = -r_a'''(t0), the rest zero
  Zero,    // E(t0) = 0
};

struct ErrorTrace {
  std::vector<double> times;
  std::vector<double> max_deviation;            // max_i ||e_i|| at each sample
  std::vector<Eigen::VectorXd> deviations;      // per agent, only when requested
  double peak = 0.0;
  double peak_time = 0.0;
};

/**
 * @brief RK4 integration of the forced error dynamics on the plan's time grid.
 *
 * The forcing uses r_L'''' from the Taylor-mode plan evaluation, with each
 * step confined to one segment.
 */
ErrorTrace simulate_error_dynamics(const ErrorSystem& system, const AffineTrajectory& trajectory, double dt,
                                   ErrorInitial initial = ErrorInitial::AtRest, bool keep_agents = false);

/// Free response from an explicit initial state (12N, axis-major), no forcing.
std::vector<double> simulate_unforced(const ErrorSystem& system, const Eigen::VectorXd& e0, double dt,
                                      int steps);

}  // namespace affine_swarm
