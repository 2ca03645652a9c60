#include "affine_swarm/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "affine_swarm/errors.hpp"
#include "json.hpp"

namespace affine_swarm {

Taylor4 gamma_series(double t, double t_l, double T_l) {
  if (!(T_l > 0.0)) throw InvalidArgument("segment duration must be positive");
  Taylor4 s((t - t_l) / T_l);
  s.coeff(1) = 1.0 / T_l;
  // Horner on 10 s^3 - 15 s^4 + 6 s^5.
  Taylor4 g(kGammaCoefficients[5]);
  for (int k = 4; k >= 0; --k) g = g * s + kGammaCoefficients[k];
  return g;
}

std::array<double, 5> gamma(double t, double t_l, double T_l) {
  const Taylor4 g = gamma_series(t, t_l, T_l);
  std::array<double, 5> out;
  for (int k = 0; k <= 4; ++k) out[k] = g.derivative(k);
  return out;
}

double lambda_min_bound(double delta, double epsilon, double d_min) {
  if (!(d_min > 0.0)) throw InvalidArgument("d_min must be positive");
  return 2.0 * (delta + epsilon) / d_min;
}

double lambda_max_bound(double r_max, double delta, double epsilon, double d_max) {
  if (!(d_max > 0.0)) throw InvalidArgument("d_max must be positive");
  return (r_max - delta - epsilon) / d_max;
}

double r_max_for_lambda_max(double lambda_max, double delta, double epsilon, double d_max) {
  return lambda_max * d_max + delta + epsilon;
}

Vec3 shear_axis(double beta5, double beta6) {
  return Vec3(std::cos(beta5) * std::cos(beta6), std::cos(beta5) * std::sin(beta6), -std::sin(beta5));
}

namespace {

std::vector<Vec3> pair_differences(std::span<const Vec3> positions) {
  if (positions.size() < 2) throw InvalidArgument("shear angles need at least two agents");
  double scale = 0.0;
  for (const auto& p : positions) scale = std::max(scale, (p - positions.front()).norm());
  std::vector<Vec3> diffs;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    for (std::size_t j = i + 1; j < positions.size(); ++j) {
      const Vec3 d = positions[i] - positions[j];
      if (d.norm() <= 1e-12 * std::max(scale, 1.0)) {
        throw InvalidArgument("agents " + std::to_string(i) + " and " + std::to_string(j) + " coincide");
      }
      diffs.push_back(d);
    }
  }
  // Short pairs first: they usually set the minimum, which lets the search
  // abandon a candidate early.
  std::stable_sort(diffs.begin(), diffs.end(),
                   [](const Vec3& a, const Vec3& b) { return a.squaredNorm() < b.squaredNorm(); });
  return diffs;
}

double min_projection(const std::vector<Vec3>& diffs, const Vec3& u, double stop_below) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& d : diffs) {
    best = std::min(best, std::abs(d.dot(u)));
    if (best <= stop_below) break;
  }
  return best;
}

}  // namespace

double min_projected_separation(std::span<const Vec3> positions, double beta5, double beta6) {
  const auto diffs = pair_differences(positions);
  return min_projection(diffs, shear_axis(beta5, beta6), -1.0);
}

ShearAngles shear_angles(std::span<const Vec3> positions, double resolution) {
  const auto diffs = pair_differences(positions);
  const int steps = static_cast<int>(std::ceil(std::numbers::pi / resolution));
  const double h = std::numbers::pi / steps;
  std::vector<double> c(steps), s(steps);
  for (int k = 0; k < steps; ++k) {
    c[k] = std::cos(k * h);
    s[k] = std::sin(k * h);
  }

  ShearAngles best;
  best.objective = min_projection(diffs, shear_axis(0.0, 0.0), -1.0);
  for (int a = 0; a < steps; ++a) {
    for (int b = 0; b < steps; ++b) {
      const Vec3 u(c[a] * c[b], c[a] * s[b], -s[a]);
      const double value = min_projection(diffs, u, best.objective);
      if (value > best.objective) {
        best = {a * h, b * h, value};
      }
    }
  }

  // Pattern search around the best grid node.
  double step = h;
  while (step > 1e-10) {
    ShearAngles candidate = best;
    const double moves[4][2] = {{step, 0.0}, {-step, 0.0}, {0.0, step}, {0.0, -step}};
    for (const auto& m : moves) {
      const double b5 = std::clamp(best.beta5 + m[0], 0.0, std::numbers::pi);
      const double b6 = std::clamp(best.beta6 + m[1], 0.0, std::numbers::pi);
      const double value = min_projection(diffs, shear_axis(b5, b6), -1.0);
      if (value > candidate.objective) candidate = {b5, b6, value};
    }
    if (candidate.objective > best.objective) {
      best = candidate;
    } else {
      step *= 0.5;
    }
  }
  return best;
}

SafetyBounds safety_bounds(std::span<const Vec3> positions, const Vec3& d0, double delta,
                           double epsilon, double r_max, double beta5, double beta6) {
  if (!(delta > 0.0) || !(epsilon > 0.0) || !(r_max > 0.0)) {
    throw InvalidArgument("delta, epsilon and r_max must be positive");
  }
  if (!(r_max > delta + epsilon)) throw InvalidArgument("r_max must exceed delta + epsilon");
  SafetyBounds b;
  b.delta = delta;
  b.epsilon = epsilon;
  b.r_max = r_max;
  b.d_min = min_projected_separation(positions, beta5, beta6);
  for (const auto& p : positions) b.d_max = std::max(b.d_max, (p - d0).norm());
  b.lambda_min = lambda_min_bound(delta, epsilon, b.d_min);
  b.lambda_max = lambda_max_bound(r_max, delta, epsilon, b.d_max);
  if (!(b.lambda_min < b.lambda_max)) {
    throw InvalidArgument("infeasible safety window: lambda_min = " + std::to_string(b.lambda_min) +
                          " >= lambda_max = " + std::to_string(b.lambda_max));
  }
  return b;
}

int MotionPlan::segment_at(double t) const {
  const double tol = 1e-9 * std::max(1.0, std::abs(tf));
  if (t < t0 - tol || t > tf + tol) {
    throw InvalidArgument("time " + std::to_string(t) + " outside plan horizon [" + std::to_string(t0) +
                          ", " + std::to_string(tf) + "]");
  }
  const auto it = std::upper_bound(segment_starts.begin(), segment_starts.end(), t);
  const int seg = static_cast<int>(it - segment_starts.begin()) - 1;
  return std::clamp(seg, 0, segment_count() - 1);
}

MotionPlan make_plan(std::vector<Vec3> waypoints, const DeformationFeatures& theta0,
                     const DeformationFeatures& thetaf, const SafetyBounds& bounds, double t0,
                     double tf) {
  if (waypoints.empty()) throw InvalidArgument("plan needs at least one waypoint");
  if (!(tf > t0)) throw InvalidArgument("plan horizon must be positive");
  // Drop repeated waypoints; a stationary plan keeps one zero-length segment.
  std::vector<Vec3> pts{waypoints.front()};
  for (std::size_t k = 1; k < waypoints.size(); ++k) {
    if ((waypoints[k] - pts.back()).norm() > 0.0) pts.push_back(waypoints[k]);
  }
  if (pts.size() == 1) pts.push_back(pts.front());

  MotionPlan plan;
  plan.waypoints = std::move(pts);
  plan.theta0 = theta0;
  plan.thetaf = thetaf;
  plan.bounds = bounds;
  plan.t0 = t0;
  plan.tf = tf;

  const int segments = static_cast<int>(plan.waypoints.size()) - 1;
  std::vector<double> lengths(segments);
  double total = 0.0;
  for (int l = 0; l < segments; ++l) {
    lengths[l] = (plan.waypoints[l + 1] - plan.waypoints[l]).norm();
    total += lengths[l];
  }
  plan.mu.resize(segments);
  for (int l = 0; l < segments; ++l) plan.mu[l] = total > 0.0 ? lengths[l] / total : 1.0 / segments;

  plan.segment_times.resize(segments);
  plan.segment_starts.resize(segments);
  double start = t0;
  double cumulative = 0.0;
  plan.theta_waypoints.push_back(theta0);
  for (int l = 0; l < segments; ++l) {
    plan.segment_starts[l] = start;
    plan.segment_times[l] = plan.mu[l] * (tf - t0);
    start += plan.segment_times[l];
    cumulative += plan.mu[l];
    if (l + 1 < segments) {
      plan.theta_waypoints.emplace_back(
          DeformationFeatures(theta0.coeffs + cumulative * (thetaf.coeffs - theta0.coeffs)));
    }
  }
  plan.theta_waypoints.push_back(thetaf);
  return plan;
}

MotionPlan retime(const MotionPlan& plan, double tf) {
  MotionPlan out =
      make_plan(plan.waypoints, plan.theta0, plan.thetaf, plan.bounds, plan.t0, tf);
  out.target_jacobian = plan.target_jacobian;
  return out;
}

namespace {

void check_segment(const MotionPlan& plan, int segment) {
  if (segment < 0 || segment >= plan.segment_count()) throw InvalidArgument("segment index out of range");
}

}  // namespace

Vector3<Taylor4> rigid_displacement(const MotionPlan& plan, double t, int segment) {
  check_segment(plan, segment);
  const Taylor4 g = gamma_series(t, plan.segment_starts[segment], plan.segment_times[segment]);
  const Vec3& a = plan.waypoints[segment];
  const Vec3& b = plan.waypoints[segment + 1];
  Vector3<Taylor4> d;
  for (int k = 0; k < 3; ++k) d[k] = a[k] + g * (b[k] - a[k]);
  return d;
}

Vector3<Taylor4> rigid_displacement(const MotionPlan& plan, double t) {
  return rigid_displacement(plan, t, plan.segment_at(t));
}

DeformationFeaturesT<Taylor4> theta_trajectory(const MotionPlan& plan, double t, int segment) {
  check_segment(plan, segment);
  const Taylor4 g = gamma_series(t, plan.segment_starts[segment], plan.segment_times[segment]);
  const auto& a = plan.theta_waypoints[segment].coeffs;
  const auto& b = plan.theta_waypoints[segment + 1].coeffs;
  DeformationFeaturesT<Taylor4> theta;
  for (int k = 0; k < 9; ++k) theta.coeffs[k] = a[k] + g * (b[k] - a[k]);
  return theta;
}

DeformationFeaturesT<Taylor4> theta_trajectory(const MotionPlan& plan, double t) {
  return theta_trajectory(plan, t, plan.segment_at(t));
}

std::vector<TimeSample> time_grid(const MotionPlan& plan, double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("time step must be positive");
  std::vector<TimeSample> grid;
  for (int l = 0; l < plan.segment_count(); ++l) {
    const double T = plan.segment_times[l];
    const int steps = std::max(1, static_cast<int>(std::ceil(T / dt - 1e-9)));
    const double h = T / steps;
    for (int k = 0; k < steps; ++k) grid.push_back({plan.segment_starts[l] + k * h, l});
  }
  grid.push_back({plan.tf, plan.segment_count() - 1});
  return grid;
}

AffineTrajectory::AffineTrajectory(MotionPlan plan, std::vector<Vec3> initial_positions)
    : plan_(std::move(plan)), r0_(std::move(initial_positions)) {}

AffineTrajectory::Sample AffineTrajectory::sample(double t, int segment) const {
  return {build_jacobian(theta_trajectory(plan_, t, segment)), rigid_displacement(plan_, t, segment)};
}

Vector3<Taylor4> AffineTrajectory::desired(const Sample& s, int agent) const {
  return global_desired_position(s.q, s.d, plan_.d0(), r0_.at(agent));
}

PlanValidation validate_plan(const MotionPlan& plan, double sample_dt) {
  if (!(sample_dt > 0.0)) throw InvalidArgument("sample_dt must be positive");
  PlanValidation report;
  report.min_lambda1 = std::numeric_limits<double>::infinity();
  const auto& b = plan.bounds;
  const auto check = [&](double t) {
    const auto theta = theta_trajectory(plan, t);
    const double l1 = theta.stretch(0).value();
    report.min_lambda1 = std::min(report.min_lambda1, l1);
    std::string why;
    if (!(l1 > b.lambda_min)) why = "lambda1 <= lambda_min";
    for (int i = 0; i < 3; ++i) {
      const double a = std::abs(theta.stretch(i).value());
      report.max_abs_lambda = std::max(report.max_abs_lambda, a);
      if (why.empty() && a > b.lambda_max) why = "|lambda" + std::to_string(i + 1) + "| > lambda_max";
    }
    if (!why.empty() && report.lambda_ok) {
      report.lambda_ok = false;
      report.first_violation_time = t;
      report.violation = why;
    }
  };
  const long long samples = static_cast<long long>(std::floor((plan.tf - plan.t0) / sample_dt));
  for (long long k = 0; k <= samples; ++k) check(plan.t0 + k * sample_dt);
  check(plan.tf);

  const Mat3 q_end = build_jacobian(theta_trajectory(plan, plan.tf)).unaryExpr([](const Taylor4& x) {
    return x.value();
  });
  const Mat3 q_target = plan.target_jacobian.value_or(build_jacobian(plan.thetaf));
  report.jacobian_residual = std::max((q_end - q_target).cwiseAbs().maxCoeff(),
                                      (build_jacobian(plan.thetaf) - q_target).cwiseAbs().maxCoeff());
  const auto d_end = rigid_displacement(plan, plan.tf);
  for (int k = 0; k < 3; ++k) {
    report.displacement_residual =
        std::max(report.displacement_residual, std::abs(d_end[k].value() - plan.df()[k]));
  }
  report.target_ok = report.jacobian_residual <= 1e-9 && report.displacement_residual <= 1e-9;
  if (!report.target_ok && report.violation.empty()) report.violation = "final configuration mismatch";
  report.ok = report.lambda_ok && report.target_ok;
  return report;
}

namespace {

nlohmann::ordered_json vec_json(const Vec3& v) { return {v[0], v[1], v[2]}; }

nlohmann::ordered_json features_json(const DeformationFeatures& f) {
  nlohmann::ordered_json j;
  j["lambda"] = {f.stretch(0), f.stretch(1), f.stretch(2)};
  j["beta"] = {f.rotation_angle(0), f.rotation_angle(1), f.rotation_angle(2),
               f.axis_angle(0),     f.axis_angle(1),     f.axis_angle(2)};
  return j;
}

}  // namespace

std::string plan_json(const MotionPlan& plan, const PlanValidation* validation) {
  nlohmann::ordered_json doc;
  auto& wps = doc["waypoints"] = nlohmann::ordered_json::array();
  for (const auto& w : plan.waypoints) wps.push_back(vec_json(w));
  doc["mu"] = plan.mu;
  doc["segment_times"] = plan.segment_times;
  doc["segment_starts"] = plan.segment_starts;
  doc["t0"] = plan.t0;
  doc["tf"] = plan.tf;
  doc["theta0"] = features_json(plan.theta0);
  doc["thetaf"] = features_json(plan.thetaf);
  doc["gamma_coeffs"] = kGammaCoefficients;
  const auto& b = plan.bounds;
  doc["bounds"] = {{"delta", b.delta},   {"epsilon", b.epsilon},       {"r_max", b.r_max},
                   {"d_min", b.d_min},   {"d_max", b.d_max},           {"lambda_min", b.lambda_min},
                   {"lambda_max", b.lambda_max}};
  if (validation) {
    nlohmann::ordered_json v;
    v["ok"] = validation->ok;
    v["lambda_ok"] = validation->lambda_ok;
    v["target_ok"] = validation->target_ok;
    v["min_lambda1"] = validation->min_lambda1;
    v["max_abs_lambda"] = validation->max_abs_lambda;
    v["jacobian_residual"] = validation->jacobian_residual;
    v["displacement_residual"] = validation->displacement_residual;
    if (validation->first_violation_time) {
      v["first_violation_time"] = *validation->first_violation_time;
      v["violation"] = validation->violation;
    }
    doc["validation"] = std::move(v);
  }
  return doc.dump(2);
}

}  // namespace affine_swarm
