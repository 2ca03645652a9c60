#include "affine_swarm/travel_time.hpp"

#include <cmath>

#include "affine_swarm/errors.hpp"

namespace affine_swarm {

Feasibility evaluate_travel_time(const MotionPlan& plan, const std::vector<Vec3>& initial_positions,
                                 const ErrorSystem& system, double duration, double delta, double rho,
                                 double dt) {
  const AffineTrajectory trajectory(retime(plan, plan.t0 + duration), initial_positions);
  const ErrorTrace trace = simulate_error_dynamics(system, trajectory, dt);
  return {trace.peak <= (1.0 - rho) * delta, trace.peak};
}

TravelTimeResult solve_travel_time(const MotionPlan& plan, const std::vector<Vec3>& initial_positions,
                                   const ErrorSystem& system, double delta, double rho,
                                   const TravelTimeOptions& options) {
  if (!(rho > 0.0 && rho < 1.0)) throw InvalidArgument("rho must lie in (0, 1)");
  if (!(delta > 0.0)) throw InvalidArgument("delta must be positive");
  if (!(options.resolution > 0.0) || !(options.initial > 0.0)) {
    throw InvalidArgument("travel-time resolution and initial guess must be positive");
  }
  TravelTimeResult result;
  result.bound = (1.0 - rho) * delta;
  const auto probe = [&](double duration) {
    const Feasibility f =
        evaluate_travel_time(plan, initial_positions, system, duration, delta, rho, options.dt);
    result.evaluations.emplace_back(duration, f);
    return f;
  };

  // Horizons live on the lattice k * resolution.
  const double res = options.resolution;
  double lo = 0.0;  // known infeasible (zero duration is never admissible)
  double hi = std::max(res, std::ceil(options.initial / res) * res);
  Feasibility at_hi;
  while (true) {
    if (hi > options.cap) {
      throw NotFoundError("no feasible travel time up to " + std::to_string(options.cap) + " s");
    }
    at_hi = probe(hi);
    if (at_hi.feasible) break;
    lo = hi;
    hi *= 2.0;
  }
  while (std::llround((hi - lo) / res) > 1) {
    const long long half = std::llround((hi - lo) / res) / 2;
    const double mid = lo + static_cast<double>(half) * res;
    const Feasibility f = probe(mid);
    if (f.feasible) {
      hi = mid;
      at_hi = f;
    } else {
      lo = mid;
    }
  }
  result.duration = hi;
  result.peak_deviation = at_hi.peak_deviation;
  return result;
}

}  // namespace affine_swarm
