#include "affine_swarm/error_dynamics.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "affine_swarm/errors.hpp"

namespace affine_swarm {

namespace {

constexpr double kStableMargin = 1e-9;

// Roots of s^4 + a3 s^3 + a2 s^2 + a1 s + a0 with complex coefficients.
Eigen::Vector4cd quartic_roots(std::complex<double> a3, std::complex<double> a2, std::complex<double> a1,
                               std::complex<double> a0) {
  Eigen::Matrix4cd c = Eigen::Matrix4cd::Zero();
  c(1, 0) = c(2, 1) = c(3, 2) = 1.0;
  c(0, 3) = -a0;
  c(1, 3) = -a1;
  c(2, 3) = -a2;
  c(3, 3) = -a3;
  const Eigen::ComplexEigenSolver<Eigen::Matrix4cd> es(c, false);
  return es.eigenvalues();
}

}  // namespace

bool routh_hurwitz_stable(const Gains& g) {
  return g.k1 > 0.0 && g.k3 > 0.0 && g.k4 > 0.0 && g.k1 * g.k2 * g.k3 > g.k3 * g.k3 + g.k1 * g.k1 * g.k4;
}

Eigen::Vector4cd characteristic_roots(const Gains& g) { return quartic_roots(g.k1, g.k2, g.k3, g.k4); }

GainReport check_gain_stability(const Gains& gains) {
  GainReport r;
  r.routh_stable = routh_hurwitz_stable(gains);
  r.roots = characteristic_roots(gains);
  r.max_real_root = r.roots.real().maxCoeff();
  r.roots_stable = r.max_real_root < -kStableMargin;
  return r;
}

bool check_gain_stability(const std::vector<Gains>& gains, std::vector<GainReport>* reports) {
  bool ok = true;
  if (reports) reports->clear();
  for (const auto& g : gains) {
    const GainReport r = check_gain_stability(g);
    ok = ok && r.stable();
    if (reports) reports->push_back(r);
  }
  return ok;
}

ErrorSystem::ErrorSystem(const CommTopology& topology, std::vector<Gains> gains)
    : L_(topology.L), H_(compute_H(topology)), leaders_(topology.leaders), gains_(std::move(gains)) {
  const int n = agents();
  if (gains_.size() == 1) gains_.assign(n, gains_.front());
  if (static_cast<int>(gains_.size()) != n) throw InvalidArgument("need one gain set per agent");
  A_axis_ = Eigen::MatrixXd::Zero(4 * n, 4 * n);
  for (int b = 0; b < 3; ++b) A_axis_.block(b * n, (b + 1) * n, n, n).setIdentity();
  Eigen::VectorXd k1(n), k2(n), k3(n), k4(n);
  for (int i = 0; i < n; ++i) {
    k1[i] = gains_[i].k1;
    k2[i] = gains_[i].k2;
    k3[i] = gains_[i].k3;
    k4[i] = gains_[i].k4;
  }
  A_axis_.block(3 * n, 0, n, n) = k4.asDiagonal() * L_;
  A_axis_.block(3 * n, n, n, n) = k3.asDiagonal() * L_;
  A_axis_.block(3 * n, 2 * n, n, n) = k2.asDiagonal() * L_;
  A_axis_.block(3 * n, 3 * n, n, n) = k1.asDiagonal() * L_;
}

bool ErrorSystem::uniform_gains() const {
  return std::all_of(gains_.begin(), gains_.end(), [&](const Gains& g) {
    return g.k1 == gains_[0].k1 && g.k2 == gains_[0].k2 && g.k3 == gains_[0].k3 && g.k4 == gains_[0].k4;
  });
}

Eigen::MatrixXd ErrorSystem::a_mqs() const {
  const auto m = A_axis_.rows();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3 * m, 3 * m);
  for (int k = 0; k < 3; ++k) a.block(k * m, k * m, m, m) = A_axis_;
  return a;
}

Eigen::VectorXcd ErrorSystem::dense_spectrum() const {
  const Eigen::EigenSolver<Eigen::MatrixXd> es(A_axis_, false);
  return es.eigenvalues();
}

Eigen::VectorXcd ErrorSystem::structured_spectrum() const {
  if (!uniform_gains()) throw InvalidArgument("structured spectrum needs uniform gains");
  const Gains& g = gains_.front();
  const Eigen::EigenSolver<Eigen::MatrixXd> es(L_, false);
  const Eigen::VectorXcd ell = es.eigenvalues();
  Eigen::VectorXcd out(4 * ell.size());
  for (Eigen::Index i = 0; i < ell.size(); ++i) {
    const std::complex<double> l = ell[i];
    out.segment<4>(4 * i) = quartic_roots(-l * g.k1, -l * g.k2, -l * g.k3, -l * g.k4);
  }
  return out;
}

Eigen::VectorXcd ErrorSystem::spectrum() const {
  return uniform_gains() ? structured_spectrum() : dense_spectrum();
}

namespace {

// r_a'''' (or another derivative) of every agent via H times the leaders'.
Eigen::MatrixXd agent_derivatives(const ErrorSystem& system, const AffineTrajectory& traj,
                                  const AffineTrajectory::Sample& s, const std::vector<int>& leaders,
                                  int order) {
  Eigen::MatrixXd rl(static_cast<Eigen::Index>(leaders.size()), 3);
  for (std::size_t j = 0; j < leaders.size(); ++j) {
    const Vector3<Taylor4> r = traj.desired(s, leaders[j]);
    for (int k = 0; k < 3; ++k) rl(static_cast<Eigen::Index>(j), k) = r[k].derivative(order);
  }
  return system.H() * rl;
}

}  // namespace

ErrorTrace simulate_error_dynamics(const ErrorSystem& system, const AffineTrajectory& trajectory, double dt,
                                   ErrorInitial initial, bool keep_agents) {
  const int n = system.agents();
  const auto& leaders = system.leaders();
  const auto grid = time_grid(trajectory.plan(), dt);
  const Eigen::MatrixXd a_last = system.axis_matrix().bottomRows(n);

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(4 * n, 3);
  if (initial == ErrorInitial::AtRest) {
    const auto s0 = trajectory.sample(grid.front().t, grid.front().segment);
    x.bottomRows(n) = -agent_derivatives(system, trajectory, s0, leaders, 3);
  }

  const auto deriv = [&](const Eigen::MatrixXd& y, double t, int seg) {
    Eigen::MatrixXd dy(4 * n, 3);
    dy.topRows(3 * n) = y.bottomRows(3 * n);
    const auto s = trajectory.sample(t, seg);
    dy.bottomRows(n) = a_last * y - agent_derivatives(system, trajectory, s, leaders, 4);
    return dy;
  };

  ErrorTrace trace;
  const auto record = [&](double t) {
    const Eigen::VectorXd dev = x.topRows(n).rowwise().norm();
    const double m = dev.maxCoeff();
    trace.times.push_back(t);
    trace.max_deviation.push_back(m);
    if (keep_agents) trace.deviations.push_back(dev);
    if (m > trace.peak) {
      trace.peak = m;
      trace.peak_time = t;
    }
  };
  record(grid.front().t);
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double t = grid[k].t;
    const double h = grid[k + 1].t - t;
    const int seg = grid[k].segment;
    if (k > 0 && seg != grid[k - 1].segment) {
      // Quintic segments meet with matching position, velocity and
      // acceleration but different jerk; the reference jump enters the error
      // directly (the snap forcing alone would miss this impulse).
      const auto before = trajectory.sample(t, grid[k - 1].segment);
      const auto after = trajectory.sample(t, seg);
      for (int order = 0; order < 4; ++order) {
        x.middleRows(order * n, n) -= agent_derivatives(system, trajectory, after, leaders, order) -
                                      agent_derivatives(system, trajectory, before, leaders, order);
      }
    }
    const Eigen::MatrixXd k1 = deriv(x, t, seg);
    const Eigen::MatrixXd k2 = deriv(x + 0.5 * h * k1, t + 0.5 * h, seg);
    const Eigen::MatrixXd k3 = deriv(x + 0.5 * h * k2, t + 0.5 * h, seg);
    const Eigen::MatrixXd k4 = deriv(x + h * k3, t + h, seg);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    record(grid[k + 1].t);
  }
  return trace;
}

std::vector<double> simulate_unforced(const ErrorSystem& system, const Eigen::VectorXd& e0, double dt,
                                      int steps) {
  const Eigen::MatrixXd a = system.a_mqs();
  if (e0.size() != a.rows()) throw InvalidArgument("initial error has the wrong size");
  Eigen::VectorXd x = e0;
  std::vector<double> norms{x.norm()};
  for (int k = 0; k < steps; ++k) {
    const Eigen::VectorXd k1 = a * x;
    const Eigen::VectorXd k2 = a * (x + 0.5 * dt * k1);
    const Eigen::VectorXd k3 = a * (x + 0.5 * dt * k2);
    const Eigen::VectorXd k4 = a * (x + dt * k3);
    x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    norms.push_back(x.norm());
  }
  return norms;
}

}  // namespace affine_swarm
