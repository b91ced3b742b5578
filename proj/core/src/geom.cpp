#include "nonplanar/geom.hpp"

#include <cmath>
#include <limits>

namespace nonplanar {

double condition_number(const Mat2<double>& m) {
  // Singular values of a 2x2 from the invariants of m^T m.
  const double fro2 = m.squaredNorm();
  const double det = std::abs(det2(m));
  const double disc = std::sqrt(std::max(0.0, fro2 * fro2 - 4.0 * det * det));
  const double smax = std::sqrt(0.5 * (fro2 + disc));
  const double smin2 = 0.5 * (fro2 - disc);
  if (smin2 <= 0.0 || det == 0.0) return std::numeric_limits<double>::infinity();
  return smax / (det / smax);
}

}  // namespace nonplanar
