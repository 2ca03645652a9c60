#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "affine_swarm/taylor.hpp"

namespace affine_swarm {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

/**
 * @brief Deformation feature vector parameterizing the affine Jacobian.
 *
 * Layout of coeffs: three stretch eigenvalues, three rigid rotation angles,
 * three angles fixing the principal stretch axes. All angles are 3-2-1 Euler
 * angles in radians.
 */
template <typename Scalar>
struct DeformationFeaturesT {
  Eigen::Matrix<Scalar, 9, 1> coeffs = Eigen::Matrix<Scalar, 9, 1>::Zero();

  DeformationFeaturesT() = default;
  explicit DeformationFeaturesT(const Eigen::Matrix<Scalar, 9, 1>& c) : coeffs(c) {}

  /// Undeformed configuration (unit stretches, no rotation) with the given
  /// principal-axis angles.
  static DeformationFeaturesT undeformed(Scalar axis_x = Scalar(0), Scalar axis_y = Scalar(0),
                                         Scalar axis_z = Scalar(0)) {
    DeformationFeaturesT f;
    f.coeffs.template head<3>().setConstant(Scalar(1));
    f.coeffs[6] = axis_x;
    f.coeffs[7] = axis_y;
    f.coeffs[8] = axis_z;
    return f;
  }

  Scalar& stretch(int i) { return coeffs[i]; }
  const Scalar& stretch(int i) const { return coeffs[i]; }
  Scalar& rotation_angle(int i) { return coeffs[3 + i]; }
  const Scalar& rotation_angle(int i) const { return coeffs[3 + i]; }
  Scalar& axis_angle(int i) { return coeffs[6 + i]; }
  const Scalar& axis_angle(int i) const { return coeffs[6 + i]; }
};

using DeformationFeatures = DeformationFeaturesT<double>;

/**
 * @brief 3-2-1 Euler rotation matrix (passive, inertial-to-rotated).
 *
 * Equals R(x,0,0) * R(0,y,0) * R(0,0,z). Row k is the k-th rotated base vector
 * expressed in the original frame.
 */
template <typename Scalar>
Matrix3<Scalar> rotation_matrix(const Scalar& x, const Scalar& y, const Scalar& z) {
  using std::cos;
  using std::sin;
  const Scalar cx = cos(x), sx = sin(x);
  const Scalar cy = cos(y), sy = sin(y);
  const Scalar cz = cos(z), sz = sin(z);
  Matrix3<Scalar> r;
  r(0, 0) = cy * cz;
  r(0, 1) = cy * sz;
  r(0, 2) = -sy;
  r(1, 0) = sx * sy * cz - cx * sz;
  r(1, 1) = sx * sy * sz + cx * cz;
  r(1, 2) = sx * cy;
  r(2, 0) = cx * sy * cz + sx * sz;
  r(2, 1) = cx * sy * sz - sx * cz;
  r(2, 2) = cx * cy;
  return r;
}

/// Principal stretch axes as matrix columns: column i is R^T(ax,ay,az) e_i.
template <typename Scalar>
Matrix3<Scalar> deformation_eigvecs(const Scalar& ax, const Scalar& ay, const Scalar& az) {
  return rotation_matrix(ax, ay, az).transpose();
}

/// Symmetric stretch factor U_D = sum_i lambda_i u_i u_i^T.
template <typename Scalar>
Matrix3<Scalar> deformation_matrix(const DeformationFeaturesT<Scalar>& theta) {
  const Matrix3<Scalar> r =
      rotation_matrix(theta.axis_angle(0), theta.axis_angle(1), theta.axis_angle(2));
  Matrix3<Scalar> lambda = Matrix3<Scalar>::Zero();
  for (int i = 0; i < 3; ++i) lambda(i, i) = theta.stretch(i);
  return (r.transpose() * lambda * r).eval();
}

/// Affine Jacobian Q = R(rotation angles) * U_D.
template <typename Scalar>
Matrix3<Scalar> build_jacobian(const DeformationFeaturesT<Scalar>& theta) {
  return (rotation_matrix(theta.rotation_angle(0), theta.rotation_angle(1),
                          theta.rotation_angle(2)) *
          deformation_matrix(theta))
      .eval();
}

/// r_a = Q (r0 - d0) + d.
template <typename Scalar>
Vector3<Scalar> global_desired_position(const Matrix3<Scalar>& q, const Vector3<Scalar>& d,
                                        const Vec3& d0, const Vec3& r0) {
  const Vector3<Scalar> offset = (r0 - d0).template cast<Scalar>();
  return (q * offset + d).eval();
}

/// Rank of [p_2 - p_1, ..., p_{n+1} - p_1] with a 1e-9 relative singular-value cutoff.
int rank_fn(std::span<const Vec3> points, int n);

/**
 * @brief Orthonormal coordinates on the affine hull of an n-simplex.
 *
 * The basis is produced by Gram-Schmidt on the edge vectors p_k - p_1, so the
 * first vertex maps to the origin.
 */
class AffineFrame {
 public:
  AffineFrame(std::span<const Vec3> simplex, int n);

  int dimension() const { return static_cast<int>(basis_.cols()); }
  const Vec3& origin() const { return origin_; }
  const Eigen::Matrix<double, 3, Eigen::Dynamic>& basis() const { return basis_; }

  Eigen::VectorXd coordinates(const Vec3& p) const;
  /// Distance of p from the affine hull.
  double off_plane_distance(const Vec3& p) const;

 private:
  Vec3 origin_;
  Eigen::Matrix<double, 3, Eigen::Dynamic> basis_;
};

/**
 * @brief Sum of sign(det D_i) for vertices and point given in n-dimensional
 * coordinates (n+1 vertices). Determinants below 1e-12 of the simplex
 * determinant count as zero.
 */
int containment_sign_sum(std::span<const Eigen::VectorXd> vertices, const Eigen::VectorXd& c);

/**
 * @brief Containment function of an n-simplex.
 *
 * For n = 3 the determinants use raw coordinates. For n < 3 the vertices and c
 * are first expressed in the simplex's AffineFrame. |result| == n + 1 iff c is
 * strictly inside. Throws DegenerateSimplexError if rank_fn < n.
 */
int containment_fn(std::span<const Vec3> points, const Vec3& c, int n);

/// Barycentric coordinates of p with respect to an n-simplex (sum to one).
Eigen::VectorXd barycentric_coordinates(std::span<const Vec3> simplex, const Vec3& p, int n);

/**
 * @brief Leader coefficient matrix (N x (n+1)): row i reconstructs agent i's
 * initial position as an affine combination of the leaders.
 *
 * Throws DegenerateSimplexError for rank-deficient leaders and
 * OffHyperplaneError naming the first agent farther than 1e-6 * extent from
 * the leaders' hyperplane.
 */
Eigen::MatrixXd leader_coefficients(std::span<const Vec3> positions,
                                    std::span<const Vec3> leader_positions, int n);

}  // namespace affine_swarm
