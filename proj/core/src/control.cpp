#include "nonplanar/control.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "nonplanar/dual.hpp"

namespace nonplanar {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Beyond the road ends the prediction reuses the end-point geometry.
template <class T>
Vec4<T> clamp_station(const RoadSurface& road, Vec4<T> z) {
  const double s = value_of(z(1));
  const double c = std::clamp(s, road.s_begin(), road.s_end());
  if (c != s) z(1) = z(1) - (s - c);
  return z;
}

template <class T>
Vec4<T> model_rates(PredictionModel model, const RoadSurface& road, const Vec4<T>& z,
                    const Vec2<T>& u, const VehicleParams& p) {
  const Vec4<T> zc = clamp_station(road, z);
  Vec4<T> out = model == PredictionModel::Nonplanar ? nonplanar_rates<T>(road, zc, u, p)
                                                     : planar_rates<T>(road, zc, u, p);
  return out;
}

template <class T>
Vec4<T> discrete_step(PredictionModel model, const RoadSurface& road, const Vec4<T>& z,
                      const Vec2<T>& u, const VehicleParams& p, double dt) {
  const auto f = [&](const Vec4<T>& zz, const Vec2<T>& uu) {
    return model_rates<T>(model, road, zz, uu, p);
  };
  return rk4<T>(f, z, u, dt);
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

void MpcConfig::validate() const {
  if (horizon < 2) throw std::invalid_argument("MPC horizon must be at least 2");
  if (!(step > 0.0)) throw std::invalid_argument("MPC step must be positive");
  for (double w : {w_y, w_theta, w_v, w_da, w_dgamma})
    if (!(w >= 0.0)) throw std::invalid_argument("MPC weights must be non-negative");
  if (!(w_y > 0.0 || w_theta > 0.0 || w_v > 0.0))
    throw std::invalid_argument("MPC needs at least one positive state weight");
  if (!std::isfinite(v_ref)) throw std::invalid_argument("v_ref must be finite");
}

void SpeedPlannerConfig::validate() const {
  if (!(lookahead > 0.0)) throw std::invalid_argument("planner lookahead must be positive");
  if (!(margin >= 0.0)) throw std::invalid_argument("planner margin must be non-negative");
  if (!(f_min + margin < f_max - margin))
    throw std::invalid_argument("planner band needs f_min + margin < f_max - margin");
  if (!(rate_weight >= 0.0)) throw std::invalid_argument("planner rate weight must be non-negative");
  if (samples < 2) throw std::invalid_argument("planner needs at least two samples");
  if (!(v_max > 0.0)) throw std::invalid_argument("planner v_max must be positive");
}

void StanleyConfig::validate() const {
  if (!(k > 0.0)) throw std::invalid_argument("Stanley gain k must be positive");
  if (!(softening > 0.0)) throw std::invalid_argument("Stanley softening must be positive");
  if (!(speed_gain >= 0.0)) throw std::invalid_argument("Stanley speed gain must be non-negative");
}

double gravity_feed_forward(const RoadSurface& road, const VehicleState& x, double g) {
  const SurfaceJet<double> jet = road.evaluate_jet(x.pose.s, x.pose.y);
  return g * kUp.dot(body_basis(jet, x.pose.theta).e1);
}

// ---------------------------------------------------------------------------
// Speed planner

PlannedSpeed plan_speed(const RoadSurface& road, const VehicleState& state, double v_desired,
                        const SpeedPlannerConfig& cfg, double v_previous,
                        const VehicleParams& params) {
  cfg.validate();
  road.check_domain(state.pose.s, state.pose.y);
  const RigidBodyParams body = params.body();

  // F_N(v) = G + K v^2 at each sample (theta = 0, beta = 0).
  struct Affine {
    double G, K;
  };
  std::vector<Affine> samples;
  samples.reserve(cfg.samples);
  for (int i = 0; i < cfg.samples; ++i) {
    const double s = std::min(state.pose.s + cfg.lookahead * i / (cfg.samples - 1), road.s_end());
    const SurfaceJet<double> jet = road.evaluate_jet(s, state.pose.y);
    const FundamentalForms<double> forms = fundamental_forms(jet);
    const Mat2<double> J = pose_jacobian(jet, 0.0);
    const double G = normal_force(jet, forms, J, 0.0, 0.0, body);
    samples.push_back({G, normal_force(jet, forms, J, 0.0, 1.0, body) - G});
  }

  const double f_lo = cfg.f_min + cfg.margin, f_hi = cfg.f_max - cfg.margin;
  const double q_max = cfg.v_max * cfg.v_max;
  double lo = 0.0, hi = q_max;  // bounds on v^2
  for (const Affine& a : samples) {
    if (std::abs(a.K) < 1e-12) {
      if (a.G < f_lo || a.G > f_hi) lo = kInf;
      continue;
    }
    double q1 = (f_lo - a.G) / a.K, q2 = (f_hi - a.G) / a.K;
    if (q1 > q2) std::swap(q1, q2);
    lo = std::max(lo, q1);
    hi = std::min(hi, q2);
  }

  PlannedSpeed out;
  const double blended = (v_desired + cfg.rate_weight * v_previous) / (1.0 + cfg.rate_weight);
  if (lo <= hi) {
    out.lo = std::sqrt(lo);
    out.hi = std::sqrt(hi);
    out.v = std::clamp(blended, out.lo, out.hi);
    return out;
  }

  // Empty band: minimize the worst violation, which is convex in v^2.
  const auto violation = [&](double q) {
    double worst = 0.0;
    for (const Affine& a : samples) {
      const double f = a.G + a.K * q;
      worst = std::max({worst, f_lo - f, f - f_hi});
    }
    return worst;
  };
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = 0.0, b = q_max;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = violation(c), fd = violation(d);
  while (b - a > 1e-9 * std::max(1.0, q_max)) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = violation(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = violation(d);
    }
  }
  out.v = std::sqrt(0.5 * (a + b));
  out.lo = out.hi = out.v;
  out.infeasible_band = true;
  return out;
}

// ---------------------------------------------------------------------------
// MPC

VectorXd warm_shift(const VectorXd& previous, int horizon) {
  if (horizon < 1 || previous.size() != 6 * horizon + 4)
    throw std::invalid_argument("warm_shift: solution size does not match the horizon");
  VectorXd out(previous.size());
  out.head(6 * (horizon - 1)) = previous.segment(6, 6 * (horizon - 1));
  // Last input repeats, terminal state duplicates.
  out.segment(6 * (horizon - 1), 4) = previous.tail(4);
  out.segment(6 * (horizon - 1) + 4, 2) = previous.segment(6 * (horizon - 1) + 4, 2);
  out.tail(4) = previous.tail(4);
  return out;
}

MpcController::MpcController(const RoadSurface& road, VehicleParams params, MpcConfig config,
                             std::optional<SpeedPlannerConfig> planner)
    : road_(&road), params_(params), config_(std::move(config)), planner_(planner) {
  params_.validate();
  config_.validate();
  if (planner_) planner_->validate();
}

std::string MpcController::name() const {
  return config_.model == PredictionModel::Nonplanar ? "nonplanar-mpc" : "planar-mpc";
}

void MpcController::reset() {
  solution_.resize(0);
  prev_model_input_ = {};
  prev_v_ref_.reset();
}

double MpcController::feed_forward(const VehicleState& x) const {
  return config_.gravity_feed_forward ? gravity_feed_forward(*road_, x, params_.g) : 0.0;
}

NlpProblem MpcController::build_problem(const VehicleState& x, double v_ref) const {
  const int N = config_.horizon;
  const MpcConfig& c = config_;
  NlpProblem p;
  p.n = c.dimension();

  p.lower = VectorXd::Constant(p.n, -kInf);
  p.upper = VectorXd::Constant(p.n, kInf);
  for (int k = 0; k < N; ++k) {
    const int iu = c.input_offset(k);
    p.lower(iu) = params_.a_min;
    p.upper(iu) = params_.a_max;
    p.lower(iu + 1) = params_.gamma_min;
    p.upper(iu + 1) = params_.gamma_max;
  }
  for (int k = 1; k <= N; ++k) {
    const int iz = c.state_offset(k);
    p.lower(iz) = 0.0;
    p.lower(iz + 2) = -road_->half_width();
    p.upper(iz + 2) = road_->half_width();
  }

  const double sy = std::sqrt(c.w_y), sth = std::sqrt(c.w_theta), sv = std::sqrt(c.w_v);
  const double sa = std::sqrt(c.w_da), sg = std::sqrt(c.w_dgamma);
  const ControlInput prev = prev_model_input_;
  p.residuals = [=](const VectorXd& z, VectorXd& r, MatrixXd& jr) {
    r.setZero(5 * N);
    jr.setZero(5 * N, p.n);
    int row = 0;
    for (int k = 1; k <= N; ++k) {
      const int iz = c.state_offset(k);
      r(row) = sv * (z(iz) - v_ref);
      jr(row++, iz) = sv;
      r(row) = sy * z(iz + 2);
      jr(row++, iz + 2) = sy;
      r(row) = sth * z(iz + 3);
      jr(row++, iz + 3) = sth;
    }
    for (int k = 0; k < N; ++k) {
      const int iu = c.input_offset(k);
      const double a_prev = k == 0 ? prev.a_t : z(iu - 6);
      const double g_prev = k == 0 ? prev.gamma : z(iu - 5);
      r(row) = sa * (z(iu) - a_prev);
      jr(row, iu) = sa;
      if (k > 0) jr(row, iu - 6) = -sa;
      ++row;
      r(row) = sg * (z(iu + 1) - g_prev);
      jr(row, iu + 1) = sg;
      if (k > 0) jr(row, iu - 5) = -sg;
      ++row;
    }
  };

  const Vec4<double> x0 = x.vector();
  const RoadSurface* road = road_;
  const VehicleParams params = params_;
  p.equalities = [=](const VectorXd& z, VectorXd& cv, MatrixXd& jc) {
    cv.resize(4 * (N + 1));
    jc.setZero(4 * (N + 1), p.n);
    cv.head<4>() = z.head<4>() - x0;
    jc.topLeftCorner<4, 4>().setIdentity();
    for (int k = 0; k < N; ++k) {
      const int iz = c.state_offset(k);
      const Eigen::Matrix<double, 6, 1> zu = z.segment<6>(iz);
      const auto res = dual_jacobian<6>(
          [&](const auto& v) {
            using D = typename std::decay_t<decltype(v)>::Scalar;
            const Vec4<D> zk = v.template head<4>();
            const Vec2<D> uk = v.template tail<2>();
            return discrete_step<D>(c.model, *road, zk, uk, params, c.step);
          },
          zu);
      const int row = 4 * (k + 1);
      cv.segment<4>(row) = z.segment<4>(c.state_offset(k + 1)) - res.value;
      jc.block<4, 6>(row, iz) = -res.jacobian;
      jc.block<4, 4>(row, c.state_offset(k + 1)).setIdentity();
    }
  };
  return p;
}

VectorXd MpcController::cold_start(const VehicleState& x) const {
  const int N = config_.horizon;
  VectorXd z(config_.dimension());
  Vec4<double> zk = x.vector();
  const Vec2<double> u = Vec2<double>::Zero();
  bool rolling = true;
  for (int k = 0; k <= N; ++k) {
    z.segment<4>(config_.state_offset(k)) = zk;
    if (k == N) break;
    z.segment<2>(config_.input_offset(k)) = u;
    if (!rolling) continue;
    try {
      const Vec4<double> next = discrete_step<double>(config_.model, *road_, zk, u, params_, config_.step);
      if (next.allFinite() && std::abs(next(2)) < road_->half_width()) zk = next;
      else rolling = false;
    } catch (const Error&) {
      rolling = false;
    }
  }
  return z;
}

ControlInput MpcController::step(const VehicleState& x, MpcDiagnostics* diag) {
  const auto start = std::chrono::steady_clock::now();
  road_->check_domain(x.pose.s, x.pose.y);
  MpcDiagnostics d;

  double v_ref = config_.v_ref;
  if (planner_) {
    const PlannedSpeed ps =
        plan_speed(*road_, x, config_.v_ref, *planner_, prev_v_ref_.value_or(config_.v_ref), params_);
    v_ref = ps.v;
    d.infeasible_band = ps.infeasible_band;
  }
  prev_v_ref_ = v_ref;
  d.v_ref_adj = v_ref;

  VectorXd guess;
  if (use_warm_start_ && solution_.size() == config_.dimension()) {
    guess = warm_shift(solution_, config_.horizon);
    guess.head<4>() = x.vector();
    // Re-propagate the duplicated terminal stage so its defect starts at zero.
    const int N = config_.horizon;
    try {
      const Vec4<double> zn = discrete_step<double>(
          config_.model, *road_, Vec4<double>(guess.segment<4>(config_.state_offset(N - 1))),
          Vec2<double>(guess.segment<2>(config_.input_offset(N - 1))), params_, config_.step);
      if (zn.allFinite()) guess.segment<4>(config_.state_offset(N)) = zn;
    } catch (const Error&) {
    }
  } else {
    guess = cold_start(x);
  }

  ControlInput model_input = prev_model_input_;
  try {
    const NlpProblem problem = build_problem(x, v_ref);
    const SolveResult r = solve_sqp(problem, guess, config_.sqp);
    d.status = r.status;
    d.iterations = r.iterations;
    d.kkt = r.kkt;
    if (r.status == SolveStatus::Converged && r.x.allFinite()) {
      solution_ = r.x;
      const int iu = config_.input_offset(0);
      model_input = {r.x(iu), r.x(iu + 1)};
    } else {
      d.fallback = true;
      solution_ = guess;
    }
  } catch (const Error&) {
    d.status = SolveStatus::LineSearchFailure;
    d.fallback = true;
    solution_.resize(0);
  }
  model_input = saturate(model_input, params_);
  prev_model_input_ = model_input;

  ControlInput applied = model_input;
  applied.a_t += feed_forward(x);
  applied = saturate(applied, params_);

  if (solution_.size() == config_.dimension()) {
    d.predicted.reserve(config_.horizon + 1);
    for (int k = 0; k <= config_.horizon; ++k)
      d.predicted.push_back(solution_.segment<4>(config_.state_offset(k)));
  }
  d.solve_ms = elapsed_ms(start);
  if (diag) *diag = std::move(d);
  return applied;
}

ControlDecision MpcController::decide(const VehicleState& x, double) {
  MpcDiagnostics d;
  ControlDecision out;
  out.input = step(x, &d);
  out.v_ref_adj = d.v_ref_adj;
  out.solve_ms = d.solve_ms;
  out.status = to_string(d.status);
  if (d.fallback) out.status += "+fallback";
  if (d.infeasible_band) out.status += "+infeasible_band";
  return out;
}

// ---------------------------------------------------------------------------
// Stanley

StanleyController::StanleyController(const RoadSurface& road, VehicleParams params,
                                     StanleyConfig config)
    : road_(&road), params_(params), config_(config) {
  params_.validate();
  config_.validate();
}

ControlInput StanleyController::step(const VehicleState& x) const {
  road_->check_domain(x.pose.s, x.pose.y);
  const double v = std::max(x.v, 0.0);
  ControlInput u;
  u.gamma = wrap_angle(-x.pose.theta) + std::atan(-config_.k * x.pose.y / (v + config_.softening));
  u.a_t = config_.speed_gain * (config_.v_ref - x.v) + gravity_feed_forward(*road_, x, params_.g);
  return saturate(u, params_);
}

ControlDecision StanleyController::decide(const VehicleState& x, double) {
  const auto start = std::chrono::steady_clock::now();
  ControlDecision out;
  out.input = step(x);
  out.v_ref_adj = config_.v_ref;
  out.solve_ms = elapsed_ms(start);
  return out;
}

}  // namespace nonplanar
