#pragma once

#include <array>
#include <optional>

#include <Eigen/Core>

#include "affine_swarm/affine_core.hpp"

namespace affine_swarm {

using StateVector = Eigen::Matrix<double, 14, 1>;
using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

/// Sign of the gyroscopic term in the rotational dynamics.
enum class GyroConvention {
  Standard,  // J w' = tau - w x (J w)
  Plus,      // J w' = tau + w x (J w)
};

struct QuadParams {
  double mass = 1.0;
  Mat3 inertia = Mat3::Identity();
  double gravity = 9.81;
  GyroConvention gyro = GyroConvention::Standard;
  std::optional<double> max_thrust_accel;  // |u_p| limit, N/s^2
  std::optional<double> max_torque;        // per-axis |tau| limit, N m

  double hover_thrust() const { return mass * gravity; }
  double gyro_sign() const { return gyro == GyroConvention::Standard ? -1.0 : 1.0; }
};

/// Extended quadcopter state. Euler angles are 3-2-1 (roll, pitch, yaw);
/// omega is the body-frame angular velocity.
struct QuadState {
  Vec3 r = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 euler = Vec3::Zero();
  Vec3 omega = Vec3::Zero();
  double p = 0.0;
  double p_dot = 0.0;

  StateVector to_vector() const;
  static QuadState from_vector(const StateVector& x);

  /// Hovering at rest at position r with yaw psi.
  static QuadState hover(const Vec3& r, const QuadParams& params, double psi = 0.0);
};

struct QuadInput {
  double u_p = 0.0;            // thrust second derivative
  Vec3 torque = Vec3::Zero();  // body torques

  Vec4 to_vector() const { return Vec4(u_p, torque[0], torque[1], torque[2]); }
};

struct OuterCommand {
  Vec3 s = Vec3::Zero();  // commanded snap
  double u_psi = 0.0;     // commanded yaw acceleration
};

/// Outer-loop gains: k1 multiplies jerk error, k4 position error.
struct Gains {
  double k1 = 4.0, k2 = 6.0, k3 = 4.0, k4 = 1.0;
};

struct YawGains {
  double k1 = 2.0, k2 = 1.0;
};

/// Maps Euler-angle rates to body rates. Throws SingularityError when
/// |theta| >= pi/2 - 1e-3.
Mat3 gamma_matrix(double phi, double theta, double psi);

/// Body rates from the rotating-frame construction w = psi' k1 + theta' j2 + phi' i_b,
/// returned in body coordinates.
Vec3 body_rates_from_frames(const Vec3& euler, const Vec3& euler_rates);

/// Euler-angle rates (phi', theta', psi').
Vec3 euler_rates(const QuadState& state);

/// Time derivative of the extended state.
StateVector extended_derivative(const QuadState& state, const QuadInput& input, const QuadParams& params);

/// Position derivatives (r, r', r'', r''') carried analytically by the model.
struct KinematicChain {
  std::array<Vec3, 4> d;
};
KinematicChain kinematic_chain(const QuadState& state, const QuadParams& params);

struct LinearizationTerms {
  Eigen::Matrix<double, 3, 4> O1;
  Vec3 O2;
  Mat4 O3;
  Vec4 O4;
  Mat3 B1;
  Vec3 B2;
  Mat4 M;
  Vec4 N;
};

/**
 * @brief Terms of the snap/yaw-acceleration map v = M u + N.
 *
 * Throws SingularityError when p <= 0.1 m g, the pitch is at its singularity,
 * or cond(M) > 1e8.
 */
LinearizationTerms linearization_terms(const QuadState& state, const QuadParams& params);

struct ControlResult {
  QuadInput input;
  bool saturated = false;
};

/// u = M^{-1}(v - N), optionally clipped to the configured limits.
ControlResult feedback_linearize(const QuadState& state, const OuterCommand& cmd, const QuadParams& params);

/**
 * @brief Outer loop s = sum_j k_j (r_d^(j) - r^(j)) and
 * u_psi = -k1psi psi' - k2psi psi.
 *
 * `reference` holds r_d and its first three derivatives; with a constant
 * reference this is the plain integrator-chain law.
 */
OuterCommand outer_loop(const QuadState& state, const std::array<Vec3, 4>& reference, const Gains& gains,
                        const YawGains& yaw_gains, const QuadParams& params);

/// Same law with the model's chain already evaluated.
OuterCommand outer_loop(const KinematicChain& chain, const QuadState& state,
                        const std::array<Vec3, 4>& reference, const Gains& gains, const YawGains& yaw_gains);

/// One classical RK4 step with the input held constant.
QuadState rk4_step(const QuadState& state, const QuadInput& input, const QuadParams& params, double dt);

}  // namespace affine_swarm
