#pragma once

// Surface-agnostic differential geometry for a body in tangent contact with a
// parametric surface x(s, y): surface jets, first and second fundamental
// forms, the pose Jacobian and the constrained velocity relations.
//
// Every routine is templated on the scalar type so the same code runs in
// double and in forward-mode dual numbers.

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "nonplanar/dual.hpp"
#include "nonplanar/errors.hpp"

namespace nonplanar {

template <class T>
using Vec2 = Eigen::Matrix<T, 2, 1>;
template <class T>
using Vec3 = Eigen::Matrix<T, 3, 1>;
template <class T>
using Mat2 = Eigen::Matrix<T, 2, 2>;
template <class T>
using Mat3 = Eigen::Matrix<T, 3, 3>;

/// Default regularity threshold (SI units) for tangent cross products and
/// fundamental-form determinants.
inline constexpr double kRegularityEps = 1e-9;

/// Relative tolerance on |x_s . x_y| / (|x_s||x_y|) below which a chart is
/// treated as orthogonal.
inline constexpr double kOrthogonalityTol = 1e-9;

inline const Vec3<double> kUp{0.0, 0.0, 1.0};

template <class T>
T dot3(const Vec3<T>& a, const Vec3<T>& b) {
  return a(0) * b(0) + a(1) * b(1) + a(2) * b(2);
}

template <class T>
Vec3<T> cross3(const Vec3<T>& a, const Vec3<T>& b) {
  return Vec3<T>(a(1) * b(2) - a(2) * b(1), a(2) * b(0) - a(0) * b(2),
                 a(0) * b(1) - a(1) * b(0));
}

template <class T>
T norm3(const Vec3<T>& a) {
  return sqrt(dot3(a, a));
}

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double kPi = std::numbers::pi;
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a <= 0.0) a += 2.0 * kPi;
  return a - kPi;
}

/// Position, first and second partials and unit normal of x(s, y).
template <class T>
struct SurfaceJet {
  Vec3<T> x;
  Vec3<T> xs;
  Vec3<T> xy;
  Vec3<T> xss;
  Vec3<T> xsy;
  Vec3<T> xyy;
  Vec3<T> normal;
};

/// Builds a jet and computes its normal (x_s × x_y normalized).
/// Throws RegularityError when |x_s × x_y| < eps.
template <class T>
SurfaceJet<T> make_jet(const Vec3<T>& x, const Vec3<T>& xs, const Vec3<T>& xy, const Vec3<T>& xss,
                       const Vec3<T>& xsy, const Vec3<T>& xyy, double eps = kRegularityEps) {
  const Vec3<T> n = cross3(xs, xy);
  const T len = norm3(n);
  if (!(value_of(len) >= eps)) throw RegularityError("surface tangents are not linearly independent");
  return SurfaceJet<T>{x, xs, xy, xss, xsy, xyy, Vec3<T>(n / len)};
}

template <class T>
bool is_orthogonal(const SurfaceJet<T>& jet, double tol = kOrthogonalityTol) {
  const double c = std::abs(value_of(dot3(jet.xs, jet.xy)));
  return c <= tol * value_of(norm3(jet.xs)) * value_of(norm3(jet.xy));
}

template <class T>
struct FundamentalForms {
  Mat2<T> first;   // Gram matrix of the tangents
  Mat2<T> second;  // normal components of the second partials
};

template <class T>
FundamentalForms<T> fundamental_forms(const SurfaceJet<T>& jet) {
  FundamentalForms<T> f;
  const T e = dot3(jet.xs, jet.xs);
  const T fsy = dot3(jet.xs, jet.xy);
  const T g = dot3(jet.xy, jet.xy);
  f.first << e, fsy, fsy, g;
  const T l = dot3(jet.xss, jet.normal);
  const T m = dot3(jet.xsy, jet.normal);
  const T n = dot3(jet.xyy, jet.normal);
  f.second << l, m, m, n;
  if (!(value_of(e * g - fsy * fsy) > kRegularityEps * kRegularityEps))
    throw RegularityError("first fundamental form is singular");
  return f;
}

template <class T>
T det2(const Mat2<T>& m) {
  return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
}

/// Adjugate inverse; throws RegularityError when |det| <= min_det.
template <class T>
Mat2<T> inverse2(const Mat2<T>& m, double min_det = kRegularityEps) {
  const T d = det2(m);
  if (!(std::abs(value_of(d)) > min_det)) throw RegularityError("singular 2x2 matrix");
  Mat2<T> inv;
  inv << m(1, 1) / d, -m(0, 1) / d, -m(1, 0) / d, m(0, 0) / d;
  return inv;
}

/// 2-norm condition number of a 2x2 matrix (infinity when singular).
double condition_number(const Mat2<double>& m);

/// Orthonormal body basis in tangent contact: e3 is the surface normal and e1
/// sits at angle theta from x_s, measured toward n × x_s.
template <class T>
struct BodyBasis {
  Vec3<T> e1;
  Vec3<T> e2;
  Vec3<T> e3;
};

template <class T>
BodyBasis<T> body_basis(const SurfaceJet<T>& jet, const T& theta) {
  const Vec3<T> ts = jet.xs / norm3(jet.xs);
  const Vec3<T> tn = cross3(jet.normal, ts);
  const T c = cos(theta);
  const T s = sin(theta);
  BodyBasis<T> b;
  b.e1 = c * ts + s * tn;
  b.e3 = jet.normal;
  b.e2 = cross3(b.e3, b.e1);
  return b;
}

/// Heading of a body basis relative to x_s: atan2(-e2·x_s, e1·x_s).
template <class T>
T heading_angle(const SurfaceJet<T>& jet, const Vec3<T>& e1, const Vec3<T>& e2) {
  return atan2(-dot3(e2, jet.xs), dot3(e1, jet.xs));
}

/// Pose Jacobian from an explicit body basis: rows (x_s·e1, x_s·e2) and
/// (x_y·e1, x_y·e2). Valid on any regular chart.
template <class T>
Mat2<T> pose_jacobian(const SurfaceJet<T>& jet, const BodyBasis<T>& basis) {
  Mat2<T> j;
  j << dot3(jet.xs, basis.e1), dot3(jet.xs, basis.e2), dot3(jet.xy, basis.e1),
      dot3(jet.xy, basis.e2);
  return j;
}

/// Closed-form pose Jacobian for charts with orthogonal tangents.
/// Throws NonOrthogonalError otherwise; use the BodyBasis overload there.
template <class T>
Mat2<T> pose_jacobian(const SurfaceJet<T>& jet, const T& theta) {
  if (!(value_of(norm3(cross3(jet.xs, jet.xy))) >= kRegularityEps))
    throw RegularityError("surface tangents are not linearly independent");
  if (!is_orthogonal(jet))
    throw NonOrthogonalError("closed-form pose Jacobian needs orthogonal tangents");
  const T ls = norm3(jet.xs);
  const T ly = norm3(jet.xy);
  const T c = cos(theta);
  const T s = sin(theta);
  Mat2<T> j;
  j << c * ls, -s * ls, s * ly, c * ly;
  return j;
}

/// (s_dot, y_dot) = I^-1 J (v1, v2).
template <class T>
Vec2<T> parametric_velocity(const FundamentalForms<T>& forms, const Mat2<T>& jac, const T& v1,
                            const T& v2) {
  const Mat2<T> first_inv = inverse2(forms.first, kRegularityEps * kRegularityEps);
  return first_inv * (jac * Vec2<T>(v1, v2));
}

/// Shape-operator product J^-1 II I^-1 J, which maps (v1, v2) to (-w2, w1).
template <class T>
Mat2<T> shape_product(const FundamentalForms<T>& forms, const Mat2<T>& jac) {
  const Mat2<T> first_inv = inverse2(forms.first, kRegularityEps * kRegularityEps);
  const Mat2<T> jac_inv = inverse2(jac, kRegularityEps);
  return jac_inv * forms.second * first_inv * jac;
}

/// Roll and pitch rates (w1, w2) induced by driving over a curved surface.
template <class T>
Vec2<T> surface_angular_velocity(const FundamentalForms<T>& forms, const Mat2<T>& jac, const T& v1,
                                 const T& v2) {
  const Vec2<T> r = shape_product(forms, jac) * Vec2<T>(v1, v2);
  return Vec2<T>(r(1), -r(0));
}

/// Rate of the parametric heading. Uses the orientation-free cross-product
/// form, so it has no singularity when e2 ⟂ x_s.
template <class T>
T theta_s_rate(const SurfaceJet<T>& jet, const T& omega3, const T& s_dot, const T& y_dot) {
  const T gss = dot3(jet.xs, jet.xs);
  if (!(value_of(gss) > kRegularityEps * kRegularityEps))
    throw RegularityError("x_s vanishes");
  const T cs = dot3(cross3(jet.xss, jet.xs), jet.normal) / gss;
  const T cy = dot3(cross3(jet.xsy, jet.xs), jet.normal) / gss;
  return omega3 + cs * s_dot + cy * y_dot;
}

/// Tangent-plane body velocity. v3 is identically zero in tangent contact.
struct BodyVelocity {
  double v1 = 0.0;
  double v2 = 0.0;
  double omega3 = 0.0;
  double omega1 = 0.0;
  double omega2 = 0.0;

  static constexpr double v3 = 0.0;

  /// Fills omega1/omega2 from the surface curvature.
  BodyVelocity with_surface_rates(const FundamentalForms<double>& forms,
                                  const Mat2<double>& jac) const {
    BodyVelocity out = *this;
    const Vec2<double> w = surface_angular_velocity(forms, jac, v1, v2);
    out.omega1 = w(0);
    out.omega2 = w(1);
    return out;
  }
};

/// (s, y, theta_s) locating a body on a chart.
struct ParametricPose {
  double s = 0.0;
  double y = 0.0;
  double theta = 0.0;
};

}  // namespace nonplanar
