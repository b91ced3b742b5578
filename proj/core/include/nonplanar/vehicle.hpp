#pragma once

// Kinematic bicycle on a road surface: state z = [v, s, y, theta_s],
// input u = [a_t, gamma].

#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "nonplanar/dynamics.hpp"
#include "nonplanar/errors.hpp"
#include "nonplanar/geom.hpp"
#include "nonplanar/surfaces.hpp"

namespace nonplanar {

template <class T>
using Vec4 = Eigen::Matrix<T, 4, 1>;

struct VehicleParams {
  double m = 2303.0;
  double lf = 1.52;
  double lr = 1.50;
  double a_min = -10.0;
  double a_max = 10.0;
  double gamma_min = -0.5;
  double gamma_max = 0.5;
  double com_height = 0.592;
  double g = kDefaultGravity;

  double wheelbase() const { return lf + lr; }
  RigidBodyParams body() const {
    RigidBodyParams p;
    p.m = m;
    p.g = g;
    return p;
  }
  void validate() const;
};

struct VehicleState {
  double v = 0.0;
  ParametricPose pose;

  Vec4<double> vector() const { return {v, pose.s, pose.y, pose.theta}; }
  static VehicleState from_vector(const Vec4<double>& z) { return {z(0), {z(1), z(2), z(3)}}; }
};

struct ControlInput {
  double a_t = 0.0;
  double gamma = 0.0;
};

/// Clips each input to its box.
ControlInput saturate(const ControlInput& u, const VehicleParams& p);

/// beta = atan(lr / (lf + lr) tan gamma).
template <class T>
T slip_angle(const T& gamma, const VehicleParams& p) {
  if (!(std::abs(value_of(gamma)) < std::numbers::pi / 2))
    throw DomainError("steering angle must satisfy |gamma| < pi/2");
  return atan(p.lr / p.wheelbase() * tan(gamma));
}

/// Rates of the nonplanar kinematic model on any road chart.
template <class T>
Vec4<T> nonplanar_rates(const RoadSurface& road, const Vec4<T>& z, const Vec2<T>& u,
                        const VehicleParams& p) {
  const T& v = z(0);
  const T& theta = z(3);
  const SurfaceJet<T> jet = road.jet(z(1), z(2));
  const FundamentalForms<T> forms = fundamental_forms(jet);
  const Mat2<T> J = pose_jacobian(jet, theta);
  const T beta = slip_angle(u(1), p);
  const T cb = cos(beta), sb = sin(beta);
  const Vec2<T> pv = parametric_velocity(forms, J, T(v * cb), T(v * sb));
  const T omega3 = v * cb * tan(u(1)) / p.wheelbase();
  Vec4<T> out;
  out(0) = u(0) + gravity_tangential(jet, J, beta, p.g);
  out(1) = pv(0);
  out(2) = pv(1);
  out(3) = theta_s_rate(jet, omega3, pv(0), pv(1));
  return out;
}

/// (v_dot, s_dot, y_dot, theta_s_dot) of the nonplanar model.
inline Vec4<double> kinematic_derivatives(const RoadSurface& road, const VehicleState& x,
                                          const ControlInput& u, const VehicleParams& p) {
  return nonplanar_rates<double>(road, x.vector(), Vec2<double>(u.a_t, u.gamma), p);
}

/// Planar Frenet model: the road is flattened to its planar curvature and
/// gravity is ignored.
template <class T>
Vec4<T> planar_rates(const RoadSurface& road, const Vec4<T>& z, const Vec2<T>& u,
                     const VehicleParams& p) {
  road.check_domain(value_of(z(1)), value_of(z(2)));
  const T& v = z(0);
  const T kappa = road.planar_curvature(z(1));
  const T beta = slip_angle(u(1), p);
  const T stretch = 1.0 - kappa * z(2);
  if (!(value_of(stretch) > kRegularityEps)) throw RegularityError("1 - kappa y vanishes");
  Vec4<T> out;
  out(0) = u(0);
  out(1) = v * cos(z(3) + beta) / stretch;
  out(2) = v * sin(z(3) + beta);
  out(3) = v * cos(beta) * tan(u(1)) / p.wheelbase() - kappa * out(1);
  return out;
}

/// Classical RK4 with the input held over the step.
template <class T, class F>
Vec4<T> rk4(const F& f, const Vec4<T>& z, const Vec2<T>& u, double dt) {
  const Vec4<T> k1 = f(z, u);
  const Vec4<T> k2 = f(Vec4<T>(z + (0.5 * dt) * k1), u);
  const Vec4<T> k3 = f(Vec4<T>(z + (0.5 * dt) * k2), u);
  const Vec4<T> k4 = f(Vec4<T>(z + dt * k3), u);
  return z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

template <class F>
VehicleState rk4_step(const F& f, const VehicleState& x, const ControlInput& u, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  return VehicleState::from_vector(rk4<double>(f, x.vector(), Vec2<double>(u.a_t, u.gamma), dt));
}

// ---------------------------------------------------------------------------
// Closed-loop simulation

struct ControlDecision {
  ControlInput input;
  double v_ref_adj = 0.0;
  double solve_ms = 0.0;
  std::string status = "ok";
};

using Policy = std::function<ControlDecision(const VehicleState&, double t)>;

struct LogRow {
  double t = 0.0;
  VehicleState state;
  double beta = 0.0;
  ControlInput input;
  double normal_force = 0.0;
  Vec3<double> position = Vec3<double>::Zero();
  double v_ref_adj = 0.0;
  double solve_ms = 0.0;
  std::string status;
};

enum class Integrator { AdaptiveRk45, FixedRk4 };

struct SimulationOptions {
  double dt = 0.05;
  double duration = 10.0;
  Integrator integrator = Integrator::AdaptiveRk45;
  double abs_tol = 1e-9;
  double rel_tol = 1e-8;
  double rk4_substep = 1e-3;
};

/// Runs the policy at every tick and integrates the nonplanar model in
/// between. Throws SimulationDiverged when the state leaves the road or
/// stops being finite.
std::vector<LogRow> simulate(const RoadSurface& road, const VehicleParams& params,
                             const VehicleState& initial, const Policy& policy,
                             const SimulationOptions& options = {});

/// Same as simulate, but rows land in `log` as they are produced, so a
/// diverged run keeps everything up to the failing step.
void simulate_into(const RoadSurface& road, const VehicleParams& params,
                   const VehicleState& initial, const Policy& policy,
                   const SimulationOptions& options, std::vector<LogRow>& log);

/// Diagnostic row for a state and applied input.
LogRow make_log_row(const RoadSurface& road, const VehicleParams& params, double t,
                    const VehicleState& x, const ControlInput& u);

}  // namespace nonplanar
