#pragma once

// Forward-mode automatic differentiation with fixed-width dual numbers.
//
// A Dual<N> carries a value and the gradient of that value with respect to N
// seed directions. All model code in this library is templated on its scalar
// type so that the same source evaluates in double and in Dual<N>.

#include <array>
#include <cmath>
#include <limits>
#include <type_traits>

#include <Eigen/Core>

#include "nonplanar/errors.hpp"

namespace nonplanar {

// Unqualified math calls inside this namespace must see both the std
// overloads for double and the Dual overloads below.
using std::atan;
using std::atan2;
using std::abs;
using std::cos;
using std::isfinite;
using std::sin;
using std::sqrt;
using std::tan;

template <int N>
struct Dual {
  double val = 0.0;
  std::array<double, N> grad{};

  Dual() = default;
  Dual(double v) : val(v) {}  // NOLINT: implicit lift from constants
  Dual(double v, const std::array<double, N>& g) : val(v), grad(g) {}

  static Dual variable(double v, int index) {
    Dual d(v);
    d.grad[static_cast<std::size_t>(index)] = 1.0;
    return d;
  }

  Dual& operator+=(const Dual& o) {
    val += o.val;
    for (int i = 0; i < N; ++i) grad[i] += o.grad[i];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    val -= o.val;
    for (int i = 0; i < N; ++i) grad[i] -= o.grad[i];
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    for (int i = 0; i < N; ++i) grad[i] = grad[i] * o.val + val * o.grad[i];
    val *= o.val;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    *this = *this / o;
    return *this;
  }

  friend Dual operator-(const Dual& a) {
    Dual r;
    r.val = -a.val;
    for (int i = 0; i < N; ++i) r.grad[i] = -a.grad[i];
    return r;
  }
  friend Dual operator+(const Dual& a) { return a; }

  friend Dual operator+(Dual a, const Dual& b) { return a += b; }
  friend Dual operator-(Dual a, const Dual& b) { return a -= b; }
  friend Dual operator*(Dual a, const Dual& b) { return a *= b; }
  friend Dual operator/(const Dual& a, const Dual& b) {
    if (b.val == 0.0) throw NonDifferentiablePoint("division by zero");
    Dual r;
    r.val = a.val / b.val;
    const double inv = 1.0 / b.val;
    for (int i = 0; i < N; ++i) r.grad[i] = (a.grad[i] - r.val * b.grad[i]) * inv;
    return r;
  }

  friend Dual operator+(Dual a, double b) { a.val += b; return a; }
  friend Dual operator+(double a, Dual b) { b.val += a; return b; }
  friend Dual operator-(Dual a, double b) { a.val -= b; return a; }
  friend Dual operator-(double a, const Dual& b) { return Dual(a) - b; }
  friend Dual operator*(Dual a, double b) {
    a.val *= b;
    for (int i = 0; i < N; ++i) a.grad[i] *= b;
    return a;
  }
  friend Dual operator*(double a, Dual b) { return b * a; }
  friend Dual operator/(const Dual& a, double b) {
    if (b == 0.0) throw NonDifferentiablePoint("division by zero");
    return a * (1.0 / b);
  }
  friend Dual operator/(double a, const Dual& b) { return Dual(a) / b; }

  friend bool operator<(const Dual& a, const Dual& b) { return a.val < b.val; }
  friend bool operator>(const Dual& a, const Dual& b) { return a.val > b.val; }
  friend bool operator<=(const Dual& a, const Dual& b) { return a.val <= b.val; }
  friend bool operator>=(const Dual& a, const Dual& b) { return a.val >= b.val; }
  friend bool operator==(const Dual& a, const Dual& b) { return a.val == b.val; }
  friend bool operator!=(const Dual& a, const Dual& b) { return a.val != b.val; }
};

namespace detail {
template <int N>
Dual<N> chain(const Dual<N>& x, double f, double dfdx) {
  Dual<N> r(f);
  for (int i = 0; i < N; ++i) r.grad[i] = dfdx * x.grad[i];
  return r;
}
}  // namespace detail

template <int N>
Dual<N> sin(const Dual<N>& x) {
  return detail::chain(x, std::sin(x.val), std::cos(x.val));
}

template <int N>
Dual<N> cos(const Dual<N>& x) {
  return detail::chain(x, std::cos(x.val), -std::sin(x.val));
}

template <int N>
Dual<N> tan(const Dual<N>& x) {
  const double c = std::cos(x.val);
  if (c == 0.0) throw NonDifferentiablePoint("tan at a pole");
  const double t = std::tan(x.val);
  return detail::chain(x, t, 1.0 + t * t);
}

template <int N>
Dual<N> atan(const Dual<N>& x) {
  return detail::chain(x, std::atan(x.val), 1.0 / (1.0 + x.val * x.val));
}

template <int N>
Dual<N> atan2(const Dual<N>& y, const Dual<N>& x) {
  const double r2 = x.val * x.val + y.val * y.val;
  if (r2 == 0.0) throw NonDifferentiablePoint("atan2 at the origin");
  Dual<N> r(std::atan2(y.val, x.val));
  for (int i = 0; i < N; ++i) r.grad[i] = (x.val * y.grad[i] - y.val * x.grad[i]) / r2;
  return r;
}

template <int N>
Dual<N> sqrt(const Dual<N>& x) {
  if (x.val < 0.0) throw NonDifferentiablePoint("sqrt of a negative value");
  const double s = std::sqrt(x.val);
  if (s == 0.0) {
    for (double g : x.grad)
      if (g != 0.0) throw NonDifferentiablePoint("sqrt at zero");
    return Dual<N>(0.0);
  }
  return detail::chain(x, s, 0.5 / s);
}

template <int N>
Dual<N> abs(const Dual<N>& x) {
  return x.val < 0.0 ? -x : x;
}

template <int N>
bool isfinite(const Dual<N>& x) {
  if (!std::isfinite(x.val)) return false;
  for (double g : x.grad)
    if (!std::isfinite(g)) return false;
  return true;
}

inline double value_of(double x) { return x; }
template <int N>
double value_of(const Dual<N>& x) {
  return x.val;
}

/// Lifts a quantity known only as a value and its derivative with respect to a
/// parameter `p` into the scalar type of `p`. Exact for first-order duals.
template <class T>
T first_order(double value, double slope, const T& p) {
  return T(value) + slope * (p - value_of(p));
}

template <class T>
struct is_dual : std::false_type {};
template <int N>
struct is_dual<Dual<N>> : std::true_type {};

/// Value and Jacobian of a vector map evaluated in forward mode.
template <int Rows, int Cols>
struct JacobianResult {
  Eigen::Matrix<double, Rows, 1> value;
  Eigen::Matrix<double, Rows, Cols> jacobian;
};

/// Evaluates `f` at `x` with Dual<N> seeds and returns f(x) and df/dx.
/// `f` must be callable with an Eigen::Matrix<Dual<N>, N, 1> and return a
/// column vector of Dual<N>.
template <int N, class F>
auto dual_jacobian(F&& f, const Eigen::Matrix<double, N, 1>& x) {
  using D = Dual<N>;
  Eigen::Matrix<D, N, 1> xd;
  for (int i = 0; i < N; ++i) xd(i) = D::variable(x(i), i);
  const auto yd = f(xd);
  using Out = std::decay_t<decltype(yd)>;
  constexpr int Rows = Out::RowsAtCompileTime;
  JacobianResult<Rows, N> out;
  const Eigen::Index m = yd.size();
  out.value.resize(m);
  out.jacobian.resize(m, N);
  for (Eigen::Index r = 0; r < m; ++r) {
    out.value(r) = yd(r).val;
    for (int c = 0; c < N; ++c) out.jacobian(r, c) = yd(r).grad[c];
  }
  return out;
}

}  // namespace nonplanar

namespace Eigen {

template <int N>
struct NumTraits<nonplanar::Dual<N>> : NumTraits<double> {
  using Real = nonplanar::Dual<N>;
  using NonInteger = nonplanar::Dual<N>;
  using Nested = nonplanar::Dual<N>;
  using Literal = nonplanar::Dual<N>;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1 + N,
    AddCost = 1 + N,
    MulCost = 1 + 2 * N
  };
  static Real epsilon() { return Real(std::numeric_limits<double>::epsilon()); }
  static Real dummy_precision() { return Real(1e-12); }
  static Real highest() { return Real(std::numeric_limits<double>::max()); }
  static Real lowest() { return Real(std::numeric_limits<double>::lowest()); }
  static int digits10() { return std::numeric_limits<double>::digits10; }
};

template <int N, typename BinaryOp>
struct ScalarBinaryOpTraits<nonplanar::Dual<N>, double, BinaryOp> {
  using ReturnType = nonplanar::Dual<N>;
};

template <int N, typename BinaryOp>
struct ScalarBinaryOpTraits<double, nonplanar::Dual<N>, BinaryOp> {
  using ReturnType = nonplanar::Dual<N>;
};

}  // namespace Eigen
