#pragma once

// Constrained rigid-body relations on a surface: dynamic rates, tangential
// gravity and the normal force the road must supply.

#include <string>

#include "nonplanar/errors.hpp"
#include "nonplanar/geom.hpp"

namespace nonplanar {

inline constexpr double kDefaultGravity = 9.81;

struct RigidBodyParams {
  double m = 2303.0;
  double I1 = 1.0;
  double I2 = 1.0;
  double I3 = 1.0;
  double g = kDefaultGravity;

  void validate() const {
    if (!(m > 0.0) || !(I1 > 0.0) || !(I2 > 0.0) || !(I3 > 0.0))
      throw DomainError("mass and inertia must be positive");
    if (!(g >= 0.0)) throw DomainError("gravity must be non-negative");
  }
};

/// Net body-frame force and torque.
struct NetWrench {
  double F1 = 0.0, F2 = 0.0, F3 = 0.0;
  double K1 = 0.0, K2 = 0.0, K3 = 0.0;
};

struct DynamicRates {
  double v1_dot = 0.0;
  double v2_dot = 0.0;
  double omega3_dot = 0.0;
};

inline DynamicRates constrained_dynamic_rates(const RigidBodyParams& p, const BodyVelocity& w,
                                              const NetWrench& f) {
  return {w.omega3 * w.v2 + f.F1 / p.m, -w.omega3 * w.v1 + f.F2 / p.m,
          ((p.I1 - p.I2) * w.omega1 * w.omega2 + f.K3) / p.I3};
}

/// Component of gravity along the direction of travel (cos beta, sin beta)
/// in the body frame: -g [x_s.e3, x_y.e3] I^-1 J (cos beta, sin beta). On
/// orthogonal charts I^-1 is diag(1/x_s.x_s, 1/x_y.x_y).
template <class T>
T gravity_tangential(const SurfaceJet<T>& jet, const Mat2<T>& jac, const T& beta, double g) {
  const FundamentalForms<T> forms = fundamental_forms(jet);
  const Vec2<T> rate = parametric_velocity(forms, jac, T(cos(beta)), T(sin(beta)));
  return -g * (jet.xs(2) * rate(0) + jet.xy(2) * rate(1));
}

/// Total normal force: centripetal part from the shape operator plus the
/// normal share of gravity.
template <class T>
T normal_force(const SurfaceJet<T>& jet, const FundamentalForms<T>& forms, const Mat2<T>& jac,
               const T& beta, const T& v, const RigidBodyParams& p) {
  const Vec2<T> c(cos(beta), sin(beta));
  const T curv = c.dot(shape_product(forms, jac) * c);
  return p.m * v * v * curv + jet.normal(2) * p.m * p.g;
}

/// Normal reaction that keeps v3 = 0: F3 = m (w1 v2 - w2 v1).
template <class T>
T constraint_reaction_f3(const FundamentalForms<T>& forms, const Mat2<T>& jac, const T& v1,
                         const T& v2, const RigidBodyParams& p) {
  const Vec2<T> w = surface_angular_velocity(forms, jac, v1, v2);
  return p.m * (w(0) * v2 - w(1) * v1);
}

}  // namespace nonplanar
