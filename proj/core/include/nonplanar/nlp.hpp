#pragma once

// Dense convex QP (Goldfarb-Idnani dual active set) and a Gauss-Newton SQP
// driver for least-squares problems with equality and box constraints.

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nonplanar/errors.hpp"

namespace nonplanar {

using VectorXd = Eigen::VectorXd;
using MatrixXd = Eigen::MatrixXd;

/// min 0.5 x'Hx + g'x  s.t.  A x = b,  C x >= d,  lower <= x <= upper.
/// Empty A / C and empty bound vectors mean "absent"; infinite bounds are skipped.
struct QpProblem {
  MatrixXd H;
  VectorXd g;
  MatrixXd A;
  VectorXd b;
  MatrixXd C;
  VectorXd d;
  VectorXd lower;
  VectorXd upper;
};

/// Solution with multipliers such that H x + g = A'y + C'z + z_lower - z_upper,
/// z, z_lower, z_upper >= 0.
struct QpResult {
  VectorXd x;
  VectorXd y;
  VectorXd z;
  VectorXd z_lower;
  VectorXd z_upper;
  int iterations = 0;
};

/// Throws InfeasibleQp when the constraints are inconsistent and
/// std::invalid_argument on mismatched dimensions or an indefinite H.
QpResult solve_qp(const QpProblem& qp);

/// Largest violation of the QP's KKT conditions (diagnostics and tests).
double qp_kkt_residual(const QpProblem& qp, const QpResult& r);

// ---------------------------------------------------------------------------

/// Least-squares NLP: min 0.5 |r(x)|^2  s.t.  c(x) = 0,  lower <= x <= upper.
struct NlpProblem {
  int n = 0;
  /// Fills the residual vector and its Jacobian.
  std::function<void(const VectorXd& x, VectorXd& r, MatrixXd& jr)> residuals;
  /// Fills the equality constraint vector and its Jacobian (may be empty).
  std::function<void(const VectorXd& x, VectorXd& c, MatrixXd& jc)> equalities;
  VectorXd lower;
  VectorXd upper;
};

enum class SolveStatus { Converged, MaxIterations, LineSearchFailure };

std::string to_string(SolveStatus s);

struct SqpOptions {
  double kkt_tol = 1e-6;
  int max_iterations = 50;
  double initial_damping = 1e-8;
  double min_damping = 1e-10;
  double max_damping = 1e6;
  double armijo = 1e-4;
  double min_step = 1e-8;
};

struct SolveResult {
  SolveStatus status = SolveStatus::MaxIterations;
  VectorXd x;
  VectorXd y;
  int iterations = 0;
  double kkt = 0.0;
  double solve_ms = 0.0;
  double merit = 0.0;
};

/// Gauss-Newton SQP with Levenberg damping, an l1 merit function and
/// backtracking. Never throws on non-convergence; the status says what happened.
/// The optional `merit_decrease` receives, for each accepted step, the merit
/// reduction measured with that step's penalty parameter.
SolveResult solve_sqp(const NlpProblem& problem, const VectorXd& initial_guess,
                      const SqpOptions& options = {},
                      std::vector<double>* merit_decrease = nullptr);

}  // namespace nonplanar
