#include "nonplanar/vehicle.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <boost/numeric/odeint.hpp>

namespace nonplanar {

void VehicleParams::validate() const {
  if (!(m > 0.0)) throw DomainError("vehicle mass must be positive");
  if (!(wheelbase() > 0.0) || !(lr >= 0.0)) throw DomainError("lf + lr must be positive");
  if (!(a_min < a_max)) throw DomainError("traction bounds must satisfy a_min < a_max");
  if (!(gamma_min < gamma_max)) throw DomainError("steering bounds must satisfy gamma_min < gamma_max");
  if (!(std::max(std::abs(gamma_min), std::abs(gamma_max)) < std::numbers::pi / 2))
    throw DomainError("steering bounds must lie inside (-pi/2, pi/2)");
  if (!(g >= 0.0)) throw DomainError("gravity must be non-negative");
}

ControlInput saturate(const ControlInput& u, const VehicleParams& p) {
  const auto clip = [](double v, double lo, double hi) {
    return std::isnan(v) ? 0.0 : std::clamp(v, lo, hi);
  };
  return {clip(u.a_t, p.a_min, p.a_max), clip(u.gamma, p.gamma_min, p.gamma_max)};
}

LogRow make_log_row(const RoadSurface& road, const VehicleParams& params, double t,
                    const VehicleState& x, const ControlInput& u) {
  LogRow row;
  row.t = t;
  row.state = x;
  row.input = u;
  row.beta = slip_angle(u.gamma, params);
  const SurfaceJet<double> jet = road.evaluate_jet(x.pose.s, x.pose.y);
  const FundamentalForms<double> forms = fundamental_forms(jet);
  const Mat2<double> J = pose_jacobian(jet, x.pose.theta);
  row.normal_force = normal_force(jet, forms, J, row.beta, x.v, params.body());
  row.position = jet.x;
  return row;
}

namespace {

using OdeState = std::array<double, 4>;

bool finite_state(const Vec4<double>& z) { return z.allFinite(); }

Vec4<double> integrate_tick(const RoadSurface& road, const VehicleParams& params,
                            const Vec4<double>& z0, const ControlInput& u,
                            const SimulationOptions& o) {
  const Vec2<double> uv(u.a_t, u.gamma);
  const auto f = [&](const Vec4<double>& z, const Vec2<double>& w) {
    return nonplanar_rates<double>(road, z, w, params);
  };
  if (o.integrator == Integrator::FixedRk4) {
    const int n = std::max(1, static_cast<int>(std::lround(o.dt / o.rk4_substep)));
    Vec4<double> z = z0;
    for (int i = 0; i < n; ++i) z = rk4<double>(f, z, uv, o.dt / n);
    return z;
  }
  namespace ode = boost::numeric::odeint;
  OdeState x{z0(0), z0(1), z0(2), z0(3)};
  const auto system = [&](const OdeState& s, OdeState& ds, double) {
    const Vec4<double> r = f(Vec4<double>(s[0], s[1], s[2], s[3]), uv);
    for (int i = 0; i < 4; ++i) ds[static_cast<std::size_t>(i)] = r(i);
  };
  ode::integrate_adaptive(ode::make_controlled<ode::runge_kutta_dopri5<OdeState>>(o.abs_tol, o.rel_tol),
                          system, x, 0.0, o.dt, o.dt / 4);
  return {x[0], x[1], x[2], x[3]};
}

}  // namespace

std::vector<LogRow> simulate(const RoadSurface& road, const VehicleParams& params,
                             const VehicleState& initial, const Policy& policy,
                             const SimulationOptions& options) {
  std::vector<LogRow> log;
  simulate_into(road, params, initial, policy, options, log);
  return log;
}

void simulate_into(const RoadSurface& road, const VehicleParams& params,
                   const VehicleState& initial, const Policy& policy,
                   const SimulationOptions& options, std::vector<LogRow>& log) {
  params.validate();
  if (!(options.dt > 0.0) || !(options.duration > 0.0))
    throw std::invalid_argument("dt and duration must be positive");
  road.check_domain(initial.pose.s, initial.pose.y);

  const long steps = std::lround(options.duration / options.dt);
  log.clear();
  log.reserve(static_cast<std::size_t>(steps + 1));
  VehicleState x = initial;
  for (long k = 0;; ++k) {
    const double t = k * options.dt;
    const ControlDecision d = policy(x, t);
    const ControlInput u = saturate(d.input, params);
    LogRow row = make_log_row(road, params, t, x, u);
    row.v_ref_adj = d.v_ref_adj;
    row.solve_ms = d.solve_ms;
    row.status = d.status;
    log.push_back(std::move(row));
    if (k == steps) break;

    Vec4<double> z;
    try {
      z = integrate_tick(road, params, x.vector(), u, options);
    } catch (const DomainError& e) {
      throw SimulationDiverged(std::string("state left the road: ") + e.what(), k);
    } catch (const RegularityError& e) {
      throw SimulationDiverged(std::string("irregular chart reached: ") + e.what(), k);
    }
    if (!finite_state(z)) throw SimulationDiverged("state became non-finite", k);
    if (!road.contains(z(1), z(2))) throw SimulationDiverged("state left the road domain", k);
    z(3) = wrap_angle(z(3));
    x = VehicleState::from_vector(z);
  }
}

}  // namespace nonplanar
