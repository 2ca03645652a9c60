#pragma once

#include <array>
#include <cmath>
#include <cstddef>

#include <Eigen/Core>

namespace affine_swarm {

/**
 * @brief Truncated Taylor polynomial in one variable (time).
 *
 * Coefficient k stores f^(k)(t)/k!. Arithmetic propagates all coefficients up
 * to Degree exactly, so a kernel templated on its scalar type returns a value
 * together with its first Degree time derivatives when fed Taylor inputs.
 */
template <typename T, int Degree>
class Taylor {
 public:
  static constexpr int kDegree = Degree;
  using Coefficients = std::array<T, Degree + 1>;

  Taylor() { c_.fill(T(0)); }
  // Implicit on purpose: Eigen mixes constants into Taylor expressions.
  Taylor(T value) {  // NOLINT(google-explicit-constructor)
    c_.fill(T(0));
    c_[0] = value;
  }

  /// Independent variable t evaluated at t0.
  static Taylor variable(T t0) {
    Taylor v(t0);
    if constexpr (Degree >= 1) v.c_[1] = T(1);
    return v;
  }

  /// Builds a series from plain derivatives f, f', f'', ...
  static Taylor from_derivatives(const std::array<T, Degree + 1>& d) {
    Taylor out;
    T factorial = T(1);
    for (int k = 0; k <= Degree; ++k) {
      if (k > 0) factorial *= T(k);
      out.c_[k] = d[k] / factorial;
    }
    return out;
  }

  T value() const { return c_[0]; }
  T coeff(int k) const { return c_[k]; }
  T& coeff(int k) { return c_[k]; }

  /// k-th time derivative.
  T derivative(int k) const {
    T factorial = T(1);
    for (int j = 2; j <= k; ++j) factorial *= T(j);
    return c_[k] * factorial;
  }

  Taylor operator-() const {
    Taylor out;
    for (int k = 0; k <= Degree; ++k) out.c_[k] = -c_[k];
    return out;
  }

  Taylor& operator+=(const Taylor& o) {
    for (int k = 0; k <= Degree; ++k) c_[k] += o.c_[k];
    return *this;
  }
  Taylor& operator-=(const Taylor& o) {
    for (int k = 0; k <= Degree; ++k) c_[k] -= o.c_[k];
    return *this;
  }
  Taylor& operator*=(const Taylor& o) {
    Coefficients r;
    for (int k = 0; k <= Degree; ++k) {
      T acc = T(0);
      for (int j = 0; j <= k; ++j) acc += c_[j] * o.c_[k - j];
      r[k] = acc;
    }
    c_ = r;
    return *this;
  }
  Taylor& operator/=(const Taylor& o) {
    Coefficients q;
    for (int k = 0; k <= Degree; ++k) {
      T acc = c_[k];
      for (int j = 1; j <= k; ++j) acc -= o.c_[j] * q[k - j];
      q[k] = acc / o.c_[0];
    }
    c_ = q;
    return *this;
  }
  Taylor& operator*=(T s) {
    for (auto& v : c_) v *= s;
    return *this;
  }
  Taylor& operator/=(T s) {
    for (auto& v : c_) v /= s;
    return *this;
  }

  friend Taylor operator+(Taylor a, const Taylor& b) { return a += b; }
  friend Taylor operator-(Taylor a, const Taylor& b) { return a -= b; }
  friend Taylor operator*(Taylor a, const Taylor& b) { return a *= b; }
  friend Taylor operator/(Taylor a, const Taylor& b) { return a /= b; }
  friend Taylor operator+(Taylor a, T b) { return a += Taylor(b); }
  friend Taylor operator+(T a, Taylor b) { return b += Taylor(a); }
  friend Taylor operator-(Taylor a, T b) { return a -= Taylor(b); }
  friend Taylor operator-(T a, const Taylor& b) { return Taylor(a) -= b; }
  friend Taylor operator*(Taylor a, T b) { return a *= b; }
  friend Taylor operator*(T a, Taylor b) { return b *= a; }
  friend Taylor operator/(Taylor a, T b) { return a /= b; }
  friend Taylor operator/(T a, const Taylor& b) { return Taylor(a) /= b; }

  // Ordering and equality look at the value only; Eigen needs them for a few
  // reductions.
  friend bool operator<(const Taylor& a, const Taylor& b) { return a.c_[0] < b.c_[0]; }
  friend bool operator>(const Taylor& a, const Taylor& b) { return a.c_[0] > b.c_[0]; }
  friend bool operator<=(const Taylor& a, const Taylor& b) { return a.c_[0] <= b.c_[0]; }
  friend bool operator>=(const Taylor& a, const Taylor& b) { return a.c_[0] >= b.c_[0]; }
  friend bool operator==(const Taylor& a, const Taylor& b) { return a.c_ == b.c_; }
  friend bool operator!=(const Taylor& a, const Taylor& b) { return !(a == b); }

 private:
  Coefficients c_;
};

template <typename T, int D>
void sincos(const Taylor<T, D>& u, Taylor<T, D>& s, Taylor<T, D>& c) {
  s = Taylor<T, D>(std::sin(u.coeff(0)));
  c = Taylor<T, D>(std::cos(u.coeff(0)));
  for (int k = 1; k <= D; ++k) {
    T sk = T(0);
    T ck = T(0);
    for (int j = 1; j <= k; ++j) {
      sk += T(j) * u.coeff(j) * c.coeff(k - j);
      ck -= T(j) * u.coeff(j) * s.coeff(k - j);
    }
    s.coeff(k) = sk / T(k);
    c.coeff(k) = ck / T(k);
  }
}

template <typename T, int D>
Taylor<T, D> sin(const Taylor<T, D>& u) {
  Taylor<T, D> s, c;
  sincos(u, s, c);
  return s;
}

template <typename T, int D>
Taylor<T, D> cos(const Taylor<T, D>& u) {
  Taylor<T, D> s, c;
  sincos(u, s, c);
  return c;
}

template <typename T, int D>
Taylor<T, D> sqrt(const Taylor<T, D>& u) {
  Taylor<T, D> r(std::sqrt(u.coeff(0)));
  for (int k = 1; k <= D; ++k) {
    T acc = u.coeff(k);
    for (int j = 1; j < k; ++j) acc -= r.coeff(j) * r.coeff(k - j);
    r.coeff(k) = acc / (T(2) * r.coeff(0));
  }
  return r;
}

template <typename T, int D>
Taylor<T, D> abs(const Taylor<T, D>& u) {
  return u.coeff(0) < T(0) ? -u : u;
}

/// Fourth-order series: value, velocity, acceleration, jerk, snap.
using Taylor4 = Taylor<double, 4>;

/// Extracts the k-th derivative of every entry of a Taylor-valued matrix.
template <typename Derived>
auto derivative_of(const Eigen::MatrixBase<Derived>& m, int k) {
  using Scalar = typename Derived::Scalar;
  return m.unaryExpr([k](const Scalar& x) { return x.derivative(k); }).eval();
}

}  // namespace affine_swarm

namespace Eigen {

template <typename T, int D>
struct NumTraits<affine_swarm::Taylor<T, D>> : NumTraits<T> {
  using Real = affine_swarm::Taylor<T, D>;
  using NonInteger = Real;
  using Nested = Real;
  using Literal = Real;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = D + 1,
    AddCost = D + 1,
    MulCost = (D + 1) * (D + 1)
  };
  static inline Real epsilon() { return Real(NumTraits<T>::epsilon()); }
  static inline Real dummy_precision() { return Real(NumTraits<T>::dummy_precision()); }
  static inline Real highest() { return Real(NumTraits<T>::highest()); }
  static inline Real lowest() { return Real(NumTraits<T>::lowest()); }
  static inline int digits10() { return NumTraits<T>::digits10(); }
};

template <typename T, int D, typename BinaryOp>
struct ScalarBinaryOpTraits<affine_swarm::Taylor<T, D>, T, BinaryOp> {
  using ReturnType = affine_swarm::Taylor<T, D>;
};

template <typename T, int D, typename BinaryOp>
struct ScalarBinaryOpTraits<T, affine_swarm::Taylor<T, D>, BinaryOp> {
  using ReturnType = affine_swarm::Taylor<T, D>;
};

}  // namespace Eigen
