#include "nonplanar/spline.hpp"

#include <stdexcept>
#include <utility>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

namespace nonplanar {

CubicSpline::CubicSpline(std::vector<double> knots, std::vector<double> values)
    : knots_(std::move(knots)), values_(std::move(values)) {
  const std::size_t n = knots_.size();
  if (n < 2) throw std::invalid_argument("spline needs at least 2 knots");
  if (values_.size() != n) throw std::invalid_argument("spline knot/value size mismatch");
  for (std::size_t i = 1; i < n; ++i)
    if (!(knots_[i] > knots_[i - 1]))
      throw std::invalid_argument("spline knots must be strictly increasing");

  std::vector<double> h(n - 1), slope(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = knots_[i + 1] - knots_[i];
    slope[i] = (values_[i + 1] - values_[i]) / h[i];
  }
  const double start_slope = slope.front();
  const double end_slope = slope.back();

  // Moments M_i = f''(s_i) of the clamped spline; the system is SPD.
  using Sparse = Eigen::SparseMatrix<double>;
  std::vector<Eigen::Triplet<double>> entries;
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
  const auto idx = [](std::size_t i) { return static_cast<int>(i); };
  for (std::size_t i = 0; i < n; ++i) {
    const double hl = i > 0 ? h[i - 1] : 0.0;
    const double hr = i + 1 < n ? h[i] : 0.0;
    entries.emplace_back(idx(i), idx(i), 2.0 * (hl + hr));
    if (i > 0) entries.emplace_back(idx(i), idx(i - 1), hl);
    if (i + 1 < n) entries.emplace_back(idx(i), idx(i + 1), hr);
    const double right = i + 1 < n ? slope[i] : end_slope;
    const double left = i > 0 ? slope[i - 1] : start_slope;
    rhs(idx(i)) = 6.0 * (right - left);
  }
  Sparse system(idx(n), idx(n));
  system.setFromTriplets(entries.begin(), entries.end());
  Eigen::SimplicialLDLT<Sparse> solver(system);
  if (solver.info() != Eigen::Success) throw std::runtime_error("spline system factorization failed");
  const Eigen::VectorXd moments = solver.solve(rhs);

  a_.resize(n - 1);
  b_.resize(n - 1);
  c_.resize(n - 1);
  d_.resize(n - 1);
  cumulative_.assign(n - 1, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double m0 = moments(idx(i));
    const double m1 = moments(idx(i + 1));
    a_[i] = values_[i];
    b_[i] = slope[i] - h[i] * (2.0 * m0 + m1) / 6.0;
    c_[i] = m0 / 2.0;
    d_[i] = (m1 - m0) / (6.0 * h[i]);
    if (i > 0) {
      const double t = h[i - 1];
      const std::size_t p = i - 1;
      cumulative_[i] = cumulative_[p] +
                       t * (a_[p] + t * (b_[p] / 2.0 + t * (c_[p] / 3.0 + t * (d_[p] / 4.0))));
    }
  }
}

}  // namespace nonplanar
