#include "nonplanar/nlp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nonplanar {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Inequality n'x >= rhs. Box rows carry an implicit unit normal.
struct Row {
  enum Kind { General, Lower, Upper } kind;
  int index;
  double rhs;
};

// Factorisation state of the dual active-set method: J = L^-T Q, and the
// leading q x q block of R is upper triangular with (J' N)_{1..q} = R.
class ActiveFactor {
 public:
  explicit ActiveFactor(MatrixXd j) : n_(static_cast<int>(j.rows())), J_(std::move(j)), R_(MatrixXd::Zero(n_, n_)) {}

  int size() const { return q_; }
  const MatrixXd& J() const { return J_; }

  VectorXd primal_step(const VectorXd& d) const {
    if (q_ == n_) return VectorXd::Zero(n_);
    return J_.rightCols(n_ - q_) * d.tail(n_ - q_);
  }

  VectorXd dual_step(const VectorXd& d) const {
    if (q_ == 0) return VectorXd();
    return R_.topLeftCorner(q_, q_).triangularView<Eigen::Upper>().solve(d.head(q_));
  }

  // Returns false when the normal is linearly dependent on the active set.
  bool add(VectorXd d) {
    for (int j = n_ - 1; j > q_; --j) {
      if (d(j) == 0.0) continue;
      const double h = std::hypot(d(j - 1), d(j));
      const double c = d(j - 1) / h, s = d(j) / h;
      d(j - 1) = h;
      d(j) = 0.0;
      rotate_columns(j - 1, j, c, s);
    }
    if (q_ == n_ || std::abs(d(q_)) <= 1e-12 * std::max(1.0, d.head(q_ + 1).norm())) return false;
    R_.col(q_).head(q_ + 1) = d.head(q_ + 1);
    ++q_;
    return true;
  }

  void remove(int l) {
    for (int col = l; col + 1 < q_; ++col) R_.col(col).head(q_) = R_.col(col + 1).head(q_);
    R_.col(q_ - 1).setZero();
    for (int j = l; j + 1 < q_; ++j) {
      const double a = R_(j, j), b = R_(j + 1, j);
      if (b == 0.0) continue;
      const double h = std::hypot(a, b);
      const double c = a / h, s = b / h;
      for (int k = j; k + 1 < q_; ++k) {
        const double r1 = R_(j, k), r2 = R_(j + 1, k);
        R_(j, k) = c * r1 + s * r2;
        R_(j + 1, k) = -s * r1 + c * r2;
      }
      rotate_columns(j, j + 1, c, s);
    }
    --q_;
    R_.row(q_).setZero();
  }

 private:
  void rotate_columns(int a, int b, double c, double s) {
    for (int i = 0; i < n_; ++i) {
      const double ja = J_(i, a), jb = J_(i, b);
      J_(i, a) = c * ja + s * jb;
      J_(i, b) = -s * ja + c * jb;
    }
  }

  int n_;
  MatrixXd J_;
  MatrixXd R_;
  int q_ = 0;
};

void check_dims(const QpProblem& qp) {
  const Eigen::Index n = qp.g.size();
  if (qp.H.rows() != n || qp.H.cols() != n) throw std::invalid_argument("QP: H must be n x n");
  if (qp.A.size() > 0 && (qp.A.cols() != n || qp.A.rows() != qp.b.size()))
    throw std::invalid_argument("QP: A/b dimension mismatch");
  if (qp.C.size() > 0 && (qp.C.cols() != n || qp.C.rows() != qp.d.size()))
    throw std::invalid_argument("QP: C/d dimension mismatch");
  if ((qp.lower.size() != 0 && qp.lower.size() != n) || (qp.upper.size() != 0 && qp.upper.size() != n))
    throw std::invalid_argument("QP: bound dimension mismatch");
  for (Eigen::Index i = 0; i < qp.lower.size() && i < qp.upper.size(); ++i)
    if (qp.lower(i) > qp.upper(i)) throw InfeasibleQp("QP: lower bound exceeds upper bound");
}

}  // namespace

QpResult solve_qp(const QpProblem& qp) {
  check_dims(qp);
  const int n = static_cast<int>(qp.g.size());
  const int me = static_cast<int>(qp.A.rows());

  std::vector<Row> rows;
  for (int k = 0; k < qp.C.rows(); ++k) rows.push_back({Row::General, k, qp.d(k)});
  for (int i = 0; i < qp.lower.size(); ++i)
    if (qp.lower(i) > -kInf) rows.push_back({Row::Lower, i, qp.lower(i)});
  for (int i = 0; i < qp.upper.size(); ++i)
    if (qp.upper(i) < kInf) rows.push_back({Row::Upper, i, -qp.upper(i)});

  Eigen::LLT<MatrixXd> llt(qp.H);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("QP: H is not positive definite");
  const MatrixXd L = llt.matrixL();
  ActiveFactor af(L.transpose().triangularView<Eigen::Upper>().solve(MatrixXd::Identity(n, n)));

  VectorXd x = -llt.solve(qp.g);
  const auto normal = [&](const Row& r) {
    VectorXd v = VectorXd::Zero(n);
    if (r.kind == Row::General) v = qp.C.row(r.index).transpose();
    else v(r.index) = r.kind == Row::Lower ? 1.0 : -1.0;
    return v;
  };
  const auto row_d = [&](const Row& r) -> VectorXd {
    if (r.kind == Row::General) return af.J().transpose() * qp.C.row(r.index).transpose();
    VectorXd v = af.J().row(r.index).transpose();
    return r.kind == Row::Lower ? v : VectorXd(-v);
  };
  const auto slack = [&](const Row& r) {
    if (r.kind == Row::General) return qp.C.row(r.index).dot(x) - r.rhs;
    return (r.kind == Row::Lower ? x(r.index) : -x(r.index)) - r.rhs;
  };

  // active[j] >= 0 indexes rows; -1 - k marks equality k.
  std::vector<int> active;
  std::vector<double> u;
  std::vector<char> is_active(rows.size(), 0);

  for (int k = 0; k < me; ++k) {
    const VectorXd np = qp.A.row(k).transpose();
    const VectorXd d = af.J().transpose() * np;
    const VectorXd z = af.primal_step(d);
    const VectorXd r = af.dual_step(d);
    const double zn = z.dot(np);
    const double resid = qp.b(k) - np.dot(x);
    if (std::abs(zn) <= 1e-14 * std::max(1.0, np.squaredNorm())) {
      if (std::abs(resid) > 1e-9 * std::max(1.0, std::abs(qp.b(k))))
        throw InfeasibleQp("QP: inconsistent equality constraints");
      continue;
    }
    const double t = resid / zn;
    x += t * z;
    for (int j = 0; j < af.size(); ++j) u[static_cast<std::size_t>(j)] -= t * r(j);
    if (!af.add(d)) throw InfeasibleQp("QP: dependent equality constraints");
    active.push_back(-1 - k);
    u.push_back(t);
  }

  const int max_iter = 50 * (n + static_cast<int>(rows.size())) + 100;
  int iterations = 0;
  for (;;) {
    if (++iterations > max_iter) throw InfeasibleQp("QP: active-set iteration limit reached");
    int p = -1;
    double worst = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (is_active[i]) continue;
      const double scale = rows[i].kind == Row::General ? std::max(1.0, qp.C.row(rows[i].index).norm()) : 1.0;
      const double s = slack(rows[i]) / scale;
      const double tol = 1e-11 * std::max(1.0, std::abs(rows[i].rhs) / scale);
      if (s < -tol && s < worst) {
        worst = s;
        p = static_cast<int>(i);
      }
    }
    if (p < 0) break;

    const Row& rp = rows[static_cast<std::size_t>(p)];
    const VectorXd np = normal(rp);
    double u_plus = 0.0;
    for (;;) {
      const VectorXd d = row_d(rp);
      const VectorXd z = af.primal_step(d);
      const VectorXd r = af.dual_step(d);
      double t1 = kInf;
      int l = -1;
      for (int j = 0; j < af.size(); ++j) {
        if (active[static_cast<std::size_t>(j)] < 0) continue;
        if (r(j) > 1e-14) {
          const double ratio = u[static_cast<std::size_t>(j)] / r(j);
          if (ratio < t1) {
            t1 = ratio;
            l = j;
          }
        }
      }
      const double zn = z.dot(np);
      const double sp = slack(rp);
      const double t2 = (z.norm() <= 1e-14 || zn <= 0.0) ? kInf : -sp / zn;
      const double t = std::min(t1, t2);
      if (t == kInf) throw InfeasibleQp("QP: inequality constraints are infeasible");
      for (int j = 0; j < af.size(); ++j) u[static_cast<std::size_t>(j)] -= t * r(j);
      u_plus += t;
      if (t2 < kInf) x += t * z;
      if (t2 <= t1) {
        if (!af.add(d)) throw InfeasibleQp("QP: degenerate active set");
        active.push_back(p);
        u.push_back(u_plus);
        is_active[static_cast<std::size_t>(p)] = 1;
        break;
      }
      is_active[static_cast<std::size_t>(active[static_cast<std::size_t>(l)])] = 0;
      active.erase(active.begin() + l);
      u.erase(u.begin() + l);
      af.remove(l);
    }
  }

  QpResult out;
  out.x = x;
  out.iterations = iterations - 1;
  out.y = VectorXd::Zero(me);
  out.z = VectorXd::Zero(qp.C.rows());
  out.z_lower = VectorXd::Zero(n);
  out.z_upper = VectorXd::Zero(n);
  for (std::size_t j = 0; j < active.size(); ++j) {
    const int a = active[j];
    if (a < 0) {
      out.y(-1 - a) = u[j];
      continue;
    }
    const Row& r = rows[static_cast<std::size_t>(a)];
    if (r.kind == Row::General) out.z(r.index) = u[j];
    else if (r.kind == Row::Lower) out.z_lower(r.index) = u[j];
    else out.z_upper(r.index) = u[j];
  }
  return out;
}

double qp_kkt_residual(const QpProblem& qp, const QpResult& r) {
  const Eigen::Index n = qp.g.size();
  VectorXd grad = qp.H * r.x + qp.g - r.z_lower + r.z_upper;
  if (qp.A.rows() > 0) grad -= qp.A.transpose() * r.y;
  if (qp.C.rows() > 0) grad -= qp.C.transpose() * r.z;
  double worst = grad.lpNorm<Eigen::Infinity>();
  if (qp.A.rows() > 0) worst = std::max(worst, (qp.A * r.x - qp.b).lpNorm<Eigen::Infinity>());
  for (Eigen::Index k = 0; k < qp.C.rows(); ++k) {
    const double s = qp.C.row(k).dot(r.x) - qp.d(k);
    worst = std::max({worst, -s, -r.z(k), std::abs(s * r.z(k))});
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (qp.lower.size() > 0) {
      const double s = r.x(i) - qp.lower(i);
      worst = std::max({worst, -s, -r.z_lower(i), std::isfinite(s) ? std::abs(s * r.z_lower(i)) : r.z_lower(i)});
    }
    if (qp.upper.size() > 0) {
      const double s = qp.upper(i) - r.x(i);
      worst = std::max({worst, -s, -r.z_upper(i), std::isfinite(s) ? std::abs(s * r.z_upper(i)) : r.z_upper(i)});
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged:
      return "converged";
    case SolveStatus::MaxIterations:
      return "max_iterations";
    case SolveStatus::LineSearchFailure:
      return "line_search_failure";
  }
  return "unknown";
}

namespace {

struct Evaluation {
  VectorXd r, c;
  MatrixXd jr, jc;
  double cost = 0.0;
  double infeasibility = 0.0;  // |c|_1
};

Evaluation evaluate(const NlpProblem& p, const VectorXd& x) {
  Evaluation e;
  p.residuals(x, e.r, e.jr);
  if (p.equalities) p.equalities(x, e.c, e.jc);
  if (e.jc.size() == 0) e.jc.resize(0, x.size());
  e.cost = 0.5 * e.r.squaredNorm();
  e.infeasibility = e.c.lpNorm<1>();
  return e;
}

bool finite(const Evaluation& e) { return std::isfinite(e.cost) && std::isfinite(e.infeasibility); }

}  // namespace

SolveResult solve_sqp(const NlpProblem& problem, const VectorXd& initial_guess,
                      const SqpOptions& o, std::vector<double>* merit_decrease) {
  const auto start = std::chrono::steady_clock::now();
  const auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  };
  const int n = problem.n;
  if (initial_guess.size() != n) throw std::invalid_argument("SQP: initial guess has wrong dimension");
  const VectorXd lower = problem.lower.size() ? problem.lower : VectorXd::Constant(n, -kInf);
  const VectorXd upper = problem.upper.size() ? problem.upper : VectorXd::Constant(n, kInf);

  SolveResult res;
  res.x = initial_guess.cwiseMax(lower).cwiseMin(upper);
  Evaluation cur = evaluate(problem, res.x);
  double mu = 1.0;
  double lambda = o.initial_damping;
  const auto merit = [&](const Evaluation& e) { return e.cost + mu * e.infeasibility; };

  for (int it = 0;; ++it) {
    const MatrixXd jtj = cur.jr.transpose() * cur.jr;
    const double scale = std::max(1.0, jtj.diagonal().maxCoeff());
    QpProblem qp;
    qp.H = jtj;
    qp.H.diagonal().array() += lambda * scale;
    qp.g = cur.jr.transpose() * cur.r;
    qp.A = cur.jc;
    qp.b = -cur.c;
    qp.lower = lower - res.x;
    qp.upper = upper - res.x;
    QpResult step;
    try {
      step = solve_qp(qp);
    } catch (const InfeasibleQp&) {
      res.status = SolveStatus::LineSearchFailure;
      break;
    }
    const VectorXd& dx = step.x;
    res.y = step.y;
    res.kkt = std::max((qp.H * dx).lpNorm<Eigen::Infinity>(), cur.c.size() ? cur.c.lpNorm<Eigen::Infinity>() : 0.0);
    res.merit = merit(cur);
    if (res.kkt <= o.kkt_tol) {
      res.status = SolveStatus::Converged;
      break;
    }
    if (it >= o.max_iterations) {
      res.status = SolveStatus::MaxIterations;
      break;
    }

    if (step.y.size()) mu = std::max(mu, 1.1 * step.y.lpNorm<Eigen::Infinity>() + 1e-3);
    const double m0 = merit(cur);
    const double slope = qp.g.dot(dx) - mu * cur.infeasibility;
    const double predicted = -(qp.g.dot(dx) + 0.5 * dx.dot(jtj * dx)) + mu * cur.infeasibility;

    double alpha = 1.0;
    Evaluation trial;
    bool accepted = false;
    while (alpha >= o.min_step) {
      bool ok = true;
      try {
        trial = evaluate(problem, (res.x + alpha * dx).cwiseMax(lower).cwiseMin(upper));
      } catch (const DomainError&) {
        ok = false;
      } catch (const RegularityError&) {
        ok = false;
      }
      if (ok && finite(trial) && merit(trial) <= m0 + o.armijo * alpha * std::min(slope, 0.0)) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      res.status = SolveStatus::LineSearchFailure;
      break;
    }
    const double actual = m0 - merit(trial);
    const double ratio = predicted > 0.0 ? actual / predicted : 0.0;
    if (alpha < 1.0 || ratio < 0.25) lambda = std::min(lambda * 4.0, o.max_damping);
    else if (ratio > 0.75) lambda = std::max(lambda / 4.0, o.min_damping);

    res.x = (res.x + alpha * dx).cwiseMax(lower).cwiseMin(upper);
    cur = std::move(trial);
    res.iterations = it + 1;
    if (merit_decrease) merit_decrease->push_back(actual);
  }
  res.solve_ms = elapsed_ms();
  return res;
}

}  // namespace nonplanar
