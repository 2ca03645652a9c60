#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "affine_swarm/affine_core.hpp"
#include "affine_swarm/taylor.hpp"

namespace affine_swarm {

/// Minimum-jerk quintic: gamma(s) = 10 s^3 - 15 s^4 + 6 s^5.
inline constexpr std::array<double, 6> kGammaCoefficients{0.0, 0.0, 0.0, 10.0, -15.0, 6.0};

/// gamma(t, t_l, T_l) as a Taylor series in t.
Taylor4 gamma_series(double t, double t_l, double T_l);

/// gamma and its first four time derivatives.
std::array<double, 5> gamma(double t, double t_l, double T_l);

struct SafetyBounds {
  double delta = 0.0;
  double epsilon = 0.0;
  double r_max = 0.0;
  double d_min = 0.0;
  double d_max = 0.0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
};

/// lambda_min = 2 (delta + epsilon) / d_min
double lambda_min_bound(double delta, double epsilon, double d_min);
/// lambda_max = (r_max - delta - epsilon) / d_max
double lambda_max_bound(double r_max, double delta, double epsilon, double d_max);
/// Ball radius that produces a given lambda_max.
double r_max_for_lambda_max(double lambda_max, double delta, double epsilon, double d_max);

/// Principal stretch axis for beta4 = 0.
Vec3 shear_axis(double beta5, double beta6);

/// min over agent pairs of |(r_i - r_j) . u1(beta5, beta6)|.
double min_projected_separation(std::span<const Vec3> positions, double beta5, double beta6);

struct ShearAngles {
  double beta5 = 0.0;
  double beta6 = 0.0;
  double objective = 0.0;  // equals d_min at these angles
};

/**
 * @brief Max-min choice of the principal stretch axis.
 *
 * Grid search over [0, pi)^2 at 1e-3 rad, then pattern-search refinement.
 * Throws InvalidArgument for fewer than two agents or coincident agents.
 */
ShearAngles shear_angles(std::span<const Vec3> positions, double resolution = 1e-3);

/// Throws InvalidArgument when inputs are non-positive, r_max <= delta +
/// epsilon, or the window lambda_min < lambda_max is empty.
SafetyBounds safety_bounds(std::span<const Vec3> positions, const Vec3& d0, double delta,
                           double epsilon, double r_max, double beta5, double beta6);

struct MotionPlan {
  std::vector<Vec3> waypoints;          // d_0 .. d_f
  std::vector<double> mu;               // per segment, sums to one
  std::vector<double> segment_times;    // T_l
  std::vector<double> segment_starts;   // t_l
  DeformationFeatures theta0;
  DeformationFeatures thetaf;
  std::vector<DeformationFeatures> theta_waypoints;
  std::optional<Mat3> target_jacobian;  // Q_f, checked against Phi(theta_f)
  SafetyBounds bounds;
  double t0 = 0.0;
  double tf = 0.0;

  int segment_count() const { return static_cast<int>(segment_times.size()); }
  /// Segment that owns t; the final instant belongs to the last segment.
  int segment_at(double t) const;
  const Vec3& d0() const { return waypoints.front(); }
  const Vec3& df() const { return waypoints.back(); }
};

/// Builds mu, T_l and the per-waypoint features for horizon [t0, tf].
MotionPlan make_plan(std::vector<Vec3> waypoints, const DeformationFeatures& theta0,
                     const DeformationFeatures& thetaf, const SafetyBounds& bounds, double t0,
                     double tf);

/// Same geometry over a new horizon.
MotionPlan retime(const MotionPlan& plan, double tf);

/// d(t) with derivatives, evaluated on the given segment (so junctions can use
/// either one-sided limit).
Vector3<Taylor4> rigid_displacement(const MotionPlan& plan, double t, int segment);
Vector3<Taylor4> rigid_displacement(const MotionPlan& plan, double t);

DeformationFeaturesT<Taylor4> theta_trajectory(const MotionPlan& plan, double t, int segment);
DeformationFeaturesT<Taylor4> theta_trajectory(const MotionPlan& plan, double t);

struct TimeSample {
  double t;
  int segment;
};

/**
 * @brief Integration grid over [t0, tf] containing every waypoint time. Each
 * segment is split into ceil(T_l / dt) equal steps; a step starting at sample
 * k uses sample k's segment throughout.
 */
std::vector<TimeSample> time_grid(const MotionPlan& plan, double dt);

/// Q(t), d(t) and the resulting desired positions r_a(t) of the whole swarm.
class AffineTrajectory {
 public:
  struct Sample {
    Matrix3<Taylor4> q;
    Vector3<Taylor4> d;
  };

  AffineTrajectory(MotionPlan plan, std::vector<Vec3> initial_positions);

  const MotionPlan& plan() const { return plan_; }
  const std::vector<Vec3>& initial_positions() const { return r0_; }

  Sample sample(double t, int segment) const;
  Sample sample(double t) const { return sample(t, plan_.segment_at(t)); }
  Vector3<Taylor4> desired(const Sample& s, int agent) const;

 private:
  MotionPlan plan_;
  std::vector<Vec3> r0_;
};

struct PlanValidation {
  bool ok = true;
  bool lambda_ok = true;
  bool target_ok = true;
  double min_lambda1 = 0.0;
  double max_abs_lambda = 0.0;
  std::optional<double> first_violation_time;
  std::string violation;
  double jacobian_residual = 0.0;
  double displacement_residual = 0.0;
};

/// Samples the eigenvalue conditions every sample_dt and checks the final
/// configuration (Phi(theta_f) = Q_f, d(tf) = d_f) to 1e-9.
PlanValidation validate_plan(const MotionPlan& plan, double sample_dt);

std::string plan_json(const MotionPlan& plan, const PlanValidation* validation = nullptr);

}  // namespace affine_swarm
