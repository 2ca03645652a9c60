#pragma once

#include <utility>
#include <vector>

#include "affine_swarm/error_dynamics.hpp"
#include "affine_swarm/planner.hpp"

namespace affine_swarm {

struct TravelTimeOptions {
  double dt = 1e-3;
  double cap = 1e4;        // largest horizon tried, seconds
  double resolution = 1.0; // bisection stops at this width, seconds
  double initial = 1.0;    // first horizon of the doubling phase
};

struct Feasibility {
  bool feasible = false;
  double peak_deviation = 0.0;
};

/// Re-times the plan to `duration` and checks max_i ||e_i|| <= (1 - rho) delta.
Feasibility evaluate_travel_time(const MotionPlan& plan, const std::vector<Vec3>& initial_positions,
                                 const ErrorSystem& system, double duration, double delta, double rho,
                                 double dt);

struct TravelTimeResult {
  double duration = 0.0;        // T* = t_f* - t0
  double peak_deviation = 0.0;  // at T*
  double bound = 0.0;           // (1 - rho) delta
  std::vector<std::pair<double, Feasibility>> evaluations;
};

/**
 * @brief Smallest feasible horizon on a `resolution` lattice.
 *
 * Doubles from `initial` until feasible, then bisects; the returned T has
 * T - resolution infeasible by construction. Throws NotFoundError if nothing
 * up to `cap` is feasible.
 */
TravelTimeResult solve_travel_time(const MotionPlan& plan, const std::vector<Vec3>& initial_positions,
                                   const ErrorSystem& system, double delta, double rho,
                                   const TravelTimeOptions& options = {});

}  // namespace affine_swarm
