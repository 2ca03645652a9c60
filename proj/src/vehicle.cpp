#include "affine_swarm/vehicle.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "affine_swarm/errors.hpp"

namespace affine_swarm {

namespace {

constexpr double kPitchMargin = 1e-3;
constexpr double kThrustFloor = 0.1;
constexpr double kMaxCondition = 1e8;

void check_pitch(double theta) {
  if (std::abs(theta) >= std::numbers::pi / 2.0 - kPitchMargin) {
    throw SingularityError("pitch " + std::to_string(theta) + " rad at the Euler-rate singularity");
  }
}

}  // namespace

StateVector QuadState::to_vector() const {
  StateVector x;
  x << r, v, euler, omega, p, p_dot;
  return x;
}

QuadState QuadState::from_vector(const StateVector& x) {
  QuadState s;
  s.r = x.segment<3>(0);
  s.v = x.segment<3>(3);
  s.euler = x.segment<3>(6);
  s.omega = x.segment<3>(9);
  s.p = x[12];
  s.p_dot = x[13];
  return s;
}

QuadState QuadState::hover(const Vec3& r, const QuadParams& params, double psi) {
  QuadState s;
  s.r = r;
  s.euler[2] = psi;
  s.p = params.hover_thrust();
  return s;
}

Mat3 gamma_matrix(double phi, double theta, double /*psi*/) {
  check_pitch(theta);
  const double sf = std::sin(phi), cf = std::cos(phi);
  const double st = std::sin(theta), ct = std::cos(theta);
  Mat3 g;
  g << 1.0, 0.0, -st,
       0.0, cf, ct * sf,
       0.0, -sf, cf * ct;
  return g;
}

Vec3 body_rates_from_frames(const Vec3& euler, const Vec3& rates) {
  const Mat3 r = rotation_matrix(euler[0], euler[1], euler[2]);
  const double psi = euler[2];
  const Vec3 k1 = Vec3::UnitZ();
  const Vec3 j2(-std::sin(psi), std::cos(psi), 0.0);
  const Vec3 ib = r.row(0).transpose();
  const Vec3 omega_inertial = rates[2] * k1 + rates[1] * j2 + rates[0] * ib;
  return r * omega_inertial;
}

Vec3 euler_rates(const QuadState& state) {
  const Mat3 g = gamma_matrix(state.euler[0], state.euler[1], state.euler[2]);
  return g.partialPivLu().solve(state.omega);
}

StateVector extended_derivative(const QuadState& state, const QuadInput& input, const QuadParams& params) {
  const Mat3 r = rotation_matrix(state.euler[0], state.euler[1], state.euler[2]);
  const Vec3 kb = r.row(2).transpose();
  const Vec3& w = state.omega;
  const Vec3 jw = params.inertia * w;
  const Vec3 w_dot = params.inertia.ldlt().solve(params.gyro_sign() * w.cross(jw) + input.torque);

  StateVector dx;
  dx.segment<3>(0) = state.v;
  dx.segment<3>(3) = (state.p / params.mass) * kb - params.gravity * Vec3::UnitZ();
  dx.segment<3>(6) = euler_rates(state);
  dx.segment<3>(9) = w_dot;
  dx[12] = state.p_dot;
  dx[13] = input.u_p;
  return dx;
}

KinematicChain kinematic_chain(const QuadState& state, const QuadParams& params) {
  const Mat3 r = rotation_matrix(state.euler[0], state.euler[1], state.euler[2]);
  const Vec3 kb = r.row(2).transpose();
  const Vec3 w_inertial = r.transpose() * state.omega;
  KinematicChain c;
  c.d[0] = state.r;
  c.d[1] = state.v;
  c.d[2] = (state.p / params.mass) * kb - params.gravity * Vec3::UnitZ();
  c.d[3] = (state.p_dot * kb + state.p * w_inertial.cross(kb)) / params.mass;
  return c;
}

LinearizationTerms linearization_terms(const QuadState& state, const QuadParams& params) {
  if (state.p <= kThrustFloor * params.hover_thrust()) {
    throw SingularityError("thrust " + std::to_string(state.p) + " N below the linearization floor");
  }
  const double phi = state.euler[0], theta = state.euler[1], psi = state.euler[2];
  const Mat3 gamma = gamma_matrix(phi, theta, psi);
  const Mat3 r = rotation_matrix(phi, theta, psi);
  const Vec3 ib = r.row(0).transpose();
  const Vec3 jb = r.row(1).transpose();
  const Vec3 kb = r.row(2).transpose();
  const Vec3 k1 = Vec3::UnitZ();
  const Vec3 j1(-std::sin(psi), std::cos(psi), 0.0);
  const Vec3& j2 = j1;
  const Vec3& i2 = ib;

  const Vec3 rates = gamma.partialPivLu().solve(state.omega);
  const double dphi = rates[0], dtheta = rates[1], dpsi = rates[2];
  const Vec3 w_inertial = r.transpose() * state.omega;
  const double p = state.p;

  // Inertial angular acceleration = [i_b j2 k1] * euler'' + b2_tilde.
  const Vec3 b2_tilde = dtheta * dpsi * k1.cross(j1) + dphi * (dpsi * k1 + dtheta * j2).cross(i2);

  LinearizationTerms t;
  t.O1.col(0) = kb;
  t.O1.col(1) = -p * jb;
  t.O1.col(2) = p * j2.cross(kb);
  t.O1.col(3) = p * k1.cross(kb);
  t.O2 = p * (b2_tilde.cross(kb) + w_inertial.cross(w_inertial.cross(kb))) +
         2.0 * state.p_dot * w_inertial.cross(kb);

  t.B1 = params.inertia * gamma;
  t.B2 = params.inertia * (r * b2_tilde) -
         params.gyro_sign() * state.omega.cross(params.inertia * state.omega);

  const Mat3 b1_inv = t.B1.inverse();
  t.O3.setZero();
  t.O3(0, 0) = 1.0;
  t.O3.bottomRightCorner<3, 3>() = b1_inv;
  t.O4.setZero();
  t.O4.tail<3>() = -b1_inv * t.B2;

  t.M.topRows<3>() = t.O1 * t.O3 / params.mass;
  t.M.row(3) << 0.0, b1_inv.row(2);
  t.N.head<3>() = (t.O1 * t.O4 + t.O2) / params.mass;
  t.N[3] = t.O4[3];

  const Eigen::JacobiSVD<Mat4> svd(t.M);
  const auto& sv = svd.singularValues();
  if (!(sv[3] > 0.0) || sv[0] / sv[3] > kMaxCondition) {
    throw SingularityError("feedback-linearization matrix is ill-conditioned");
  }
  return t;
}

ControlResult feedback_linearize(const QuadState& state, const OuterCommand& cmd, const QuadParams& params) {
  const LinearizationTerms t = linearization_terms(state, params);
  Vec4 v;
  v << cmd.s, cmd.u_psi;
  const Vec4 u = t.M.partialPivLu().solve(v - t.N);
  ControlResult out;
  out.input.u_p = u[0];
  out.input.torque = u.tail<3>();
  if (params.max_thrust_accel && std::abs(out.input.u_p) > *params.max_thrust_accel) {
    out.input.u_p = std::copysign(*params.max_thrust_accel, out.input.u_p);
    out.saturated = true;
  }
  if (params.max_torque) {
    for (int k = 0; k < 3; ++k) {
      if (std::abs(out.input.torque[k]) > *params.max_torque) {
        out.input.torque[k] = std::copysign(*params.max_torque, out.input.torque[k]);
        out.saturated = true;
      }
    }
  }
  return out;
}

OuterCommand outer_loop(const KinematicChain& chain, const QuadState& state,
                        const std::array<Vec3, 4>& reference, const Gains& gains, const YawGains& yaw_gains) {
  OuterCommand cmd;
  cmd.s = gains.k4 * (reference[0] - chain.d[0]) + gains.k3 * (reference[1] - chain.d[1]) +
          gains.k2 * (reference[2] - chain.d[2]) + gains.k1 * (reference[3] - chain.d[3]);
  const double dpsi = euler_rates(state)[2];
  cmd.u_psi = -yaw_gains.k1 * dpsi - yaw_gains.k2 * state.euler[2];
  return cmd;
}

OuterCommand outer_loop(const QuadState& state, const std::array<Vec3, 4>& reference, const Gains& gains,
                        const YawGains& yaw_gains, const QuadParams& params) {
  return outer_loop(kinematic_chain(state, params), state, reference, gains, yaw_gains);
}

QuadState rk4_step(const QuadState& state, const QuadInput& input, const QuadParams& params, double dt) {
  const StateVector x = state.to_vector();
  const auto f = [&](const StateVector& y) {
    return extended_derivative(QuadState::from_vector(y), input, params);
  };
  const StateVector k1 = f(x);
  const StateVector k2 = f(x + 0.5 * dt * k1);
  const StateVector k3 = f(x + 0.5 * dt * k2);
  const StateVector k4 = f(x + dt * k3);
  return QuadState::from_vector(x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

}  // namespace affine_swarm
