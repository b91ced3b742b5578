#include "nonplanar/surfaces.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>

namespace nonplanar {

namespace {

constexpr double kMaxStep = 0.1;       // centerline quadrature step (m)
constexpr double kGridPitch = 0.5;     // regularity grid pitch (m)
constexpr double kDomainSlack = 1e-9;  // absorbs rounding at the domain edges

Mat3<double> orthonormalize(const Mat3<double>& R) {
  Vec3<double> e1 = R.col(0).normalized();
  Vec3<double> e2 = (R.col(1) - e1.dot(R.col(1)) * e1).normalized();
  Mat3<double> out;
  out.col(0) = e1;
  out.col(1) = e2;
  out.col(2) = e1.cross(e2);
  return out;
}

// Rodrigues formula for the exponential of a skew-symmetric matrix.
Mat3<double> skew_exp(const Mat3<double>& w) {
  const Vec3<double> v(w(2, 1), w(0, 2), w(1, 0));
  const double th = v.norm();
  double a, b;
  if (th < 1e-4) {
    const double t2 = th * th;
    a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
    b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
  } else {
    a = std::sin(th) / th;
    b = (1.0 - std::cos(th)) / (th * th);
  }
  return Mat3<double>::Identity() + a * w + b * w * w;
}

}  // namespace

std::string to_string(RoadKind kind) {
  switch (kind) {
    case RoadKind::Frenet:
      return "frenet";
    case RoadKind::TaitBryan:
      return "tait-bryan";
    case RoadKind::Darboux:
      return "darboux";
  }
  return "unknown";
}

AngleProfile::AngleProfile(std::vector<double> s, std::vector<double> a, std::vector<double> b,
                           std::vector<double> c)
    : a_(s, std::move(a)), b_(s, std::move(b)), c_(s, std::move(c)) {}

AngleProfile::AngleProfile(const CurvatureProfile& heading_rate, std::vector<double> b,
                           std::vector<double> c)
    : b_(heading_rate.breakpoints(), std::move(b)),
      c_(heading_rate.breakpoints(), std::move(c)),
      rate_(heading_rate) {}

Vec3<double> tait_bryan_to_darboux(const AngleProfile& profile, double s) {
  const DarbouxJet<double> k = tait_bryan_to_darboux(profile.evaluate(s));
  return {k.ks, k.ky, k.kn};
}

CurvatureProfile::CurvatureProfile(std::vector<double> s, std::vector<double> kappa,
                                   double initial_heading)
    : k_(std::move(s), std::move(kappa)), psi0_(initial_heading) {}

DarbouxProfile::DarbouxProfile(std::vector<double> s, std::vector<double> ks,
                               std::vector<double> ky, std::vector<double> kn,
                               const Mat3<double>& initial_frame)
    : breakpoints_(s),
      ks_(s, std::move(ks)),
      ky_(s, std::move(ky)),
      kn_(s, std::move(kn)),
      frame0_(initial_frame) {
  if (std::abs(frame0_.determinant() - 1.0) > 1e-9 ||
      !(frame0_.transpose() * frame0_).isApprox(Mat3<double>::Identity(), 1e-9))
    throw std::invalid_argument("initial frame must be a rotation");
}

DarbouxProfile::DarbouxProfile(const AngleProfile& angles)
    : breakpoints_(angles.breakpoints()), angles_(angles) {
  const AngleJet<double> q = angles.evaluate(angles.s_begin());
  frame0_ = frame_from_angles(q.a, q.b, q.c);
}

DarbouxProfile DarbouxProfile::from_angles(const AngleProfile& angles) {
  return DarbouxProfile(angles);
}

RoadSurface::RoadSurface(Profile profile, RoadOptions options)
    : profile_(std::move(profile)), options_(std::move(options)) {
  if (!(options_.half_width > 0.0)) throw std::invalid_argument("lane half-width must be positive");
  std::visit(
      [this](const auto& p) {
        s0_ = p.s_begin();
        s1_ = p.s_end();
      },
      profile_);
  build_nodes();
  check_regularity();
}

RoadKind RoadSurface::kind() const {
  switch (profile_.index()) {
    case 0:
      return RoadKind::Frenet;
    case 1:
      return RoadKind::TaitBryan;
    default:
      return RoadKind::Darboux;
  }
}

bool RoadSurface::contains(double s, double y) const {
  return s >= s0_ - kDomainSlack && s <= s1_ + kDomainSlack &&
         std::abs(y) <= options_.half_width + kDomainSlack && std::isfinite(s) &&
         std::isfinite(y);
}

void RoadSurface::check_domain(double s, double y) const {
  if (!contains(s, y))
    throw DomainError("(s, y) = (" + std::to_string(s) + ", " + std::to_string(y) +
                      ") outside road domain [" + std::to_string(s0_) + ", " +
                      std::to_string(s1_) + "] x [-" + std::to_string(options_.half_width) +
                      ", " + std::to_string(options_.half_width) + "]");
}

Vec3<double> RoadSurface::centerline_es(double s) const {
  s = std::clamp(s, s0_, s1_);
  if (const auto* p = std::get_if<CurvatureProfile>(&profile_)) {
    const double psi = p->heading(s);
    return {std::cos(psi), std::sin(psi), 0.0};
  }
  if (const auto* p = std::get_if<AngleProfile>(&profile_)) {
    const AngleJet<double> q = p->evaluate(s);
    return frame_from_angles(q.a, q.b, q.c).col(0);
  }
  Mat3<double> R;
  Vec3<double> x;
  darboux_state(s, R, x);
  return R.col(0);
}

void RoadSurface::darboux_step(double s, double h, Mat3<double>& R, Vec3<double>& x) const {
  // Fourth-order Magnus step for R' = R W (exact when W is constant); the
  // centerline position uses Simpson with a half-step frame.
  const auto& p = std::get<DarbouxProfile>(profile_);
  const auto generator = [&p](double at) {
    const DarbouxJet<double> k = p.evaluate(at);
    return darboux_generator(k.ks, k.ky, k.kn);
  };
  const auto magnus = [&](double len) {
    const double r = std::sqrt(3.0) / 6.0;
    const Mat3<double> w1 = generator(s + (0.5 - r) * len);
    const Mat3<double> w2 = generator(s + (0.5 + r) * len);
    return Mat3<double>(0.5 * len * (w1 + w2) + std::sqrt(3.0) / 12.0 * len * len * (w1 * w2 - w2 * w1));
  };
  const Mat3<double> r_half = R * skew_exp(magnus(0.5 * h));
  const Mat3<double> r_end = R * skew_exp(magnus(h));
  x += h / 6.0 * (R.col(0) + 4.0 * r_half.col(0) + r_end.col(0));
  R = r_end;
}

void RoadSurface::build_nodes() {
  const std::vector<double>& bps = std::visit(
      [](const auto& p) -> const std::vector<double>& { return p.breakpoints(); }, profile_);
  const bool darboux = kind() == RoadKind::Darboux;
  Mat3<double> R = darboux ? std::get<DarbouxProfile>(profile_).initial_frame()
                           : Mat3<double>::Identity();
  Vec3<double> x = options_.anchor;
  nodes_.clear();
  nodes_.push_back({bps.front(), x, R});
  for (std::size_t i = 0; i + 1 < bps.size(); ++i) {
    const double len = bps[i + 1] - bps[i];
    const int steps = std::max(1, static_cast<int>(std::ceil(len / kMaxStep - 1e-12)));
    const double h = len / steps;
    for (int j = 0; j < steps; ++j) {
      const double s = bps[i] + j * h;
      if (darboux) {
        darboux_step(s, h, R, x);
        R = orthonormalize(R);
      } else {
        x += h / 6.0 * (centerline_es(s) + 4.0 * centerline_es(s + 0.5 * h) + centerline_es(s + h));
      }
      const double s_next = (j + 1 == steps) ? bps[i + 1] : bps[i] + (j + 1) * h;
      nodes_.push_back({s_next, x, R});
    }
  }
}

std::size_t RoadSurface::node_index(double s) const {
  const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), s,
                                   [](double v, const Node& n) { return v < n.s; });
  const auto idx = static_cast<std::ptrdiff_t>(it - nodes_.begin()) - 1;
  return static_cast<std::size_t>(
      std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(nodes_.size()) - 1));
}

void RoadSurface::darboux_state(double s, Mat3<double>& R, Vec3<double>& x) const {
  const Node& n = nodes_[node_index(s)];
  R = n.R;
  x = n.x;
  const double h = s - n.s;
  if (h > 0.0) darboux_step(n.s, h, R, x);
}

Vec3<double> RoadSurface::centerline_position(double s) const {
  if (!(s >= s0_ - kDomainSlack && s <= s1_ + kDomainSlack))
    throw DomainError("s = " + std::to_string(s) + " outside road domain");
  s = std::clamp(s, s0_, s1_);
  const Node& n = nodes_[node_index(s)];
  const double h = s - n.s;
  if (h <= 0.0) return n.x;
  if (kind() == RoadKind::Darboux) {
    Mat3<double> R = n.R;
    Vec3<double> x = n.x;
    darboux_step(n.s, h, R, x);
    return x;
  }
  return n.x + h / 6.0 * (centerline_es(n.s) + 4.0 * centerline_es(n.s + 0.5 * h) + centerline_es(s));
}

double RoadSurface::planar_curvature_rate(double s) const {
  if (const auto* p = std::get_if<CurvatureProfile>(&profile_)) return p->dkappa(s);
  if (const auto* p = std::get_if<AngleProfile>(&profile_)) return p->evaluate(s).dda;
  return std::get<DarbouxProfile>(profile_).evaluate(s).dkn;
}

void RoadSurface::check_regularity() const {
  const int ns = std::max(1, static_cast<int>(std::ceil((s1_ - s0_) / kGridPitch)));
  const double w = options_.half_width;
  const double ys[4] = {-w, -w / 3.0, w / 3.0, w};
  for (int i = 0; i <= ns; ++i) {
    const double s = std::min(s1_, s0_ + i * kGridPitch);
    for (double y : ys) {
      try {
        const SurfaceJet<double> j = jet(s, y);
        (void)fundamental_forms(j);
        // A chart that folds over (1 - kappa y < 0) flips its normal.
        if (!(j.xs.cross(j.xy).dot(frame(s).en()) > kRegularityEps))
          throw RegularityError("tangent orientation flips across the lane");
      } catch (const RegularityError& e) {
        throw RegularityError("road is not regular at (s, y) = (" + std::to_string(s) + ", " +
                              std::to_string(y) + "): " + e.what());
      }
    }
  }
}

RoadSurface::GlobalPose RoadSurface::global_pose(const ParametricPose& pose) const {
  const SurfaceJet<double> j = jet(pose.s, pose.y);
  const BodyBasis<double> b = body_basis(j, pose.theta);
  GlobalPose out;
  out.position = j.x;
  out.rotation.col(0) = b.e1;
  out.rotation.col(1) = b.e2;
  out.rotation.col(2) = b.e3;
  return out;
}

ParametricPose RoadSurface::tangent_contact_pose(const Vec3<double>& position,
                                                 const Mat3<double>& rotation,
                                                 double s_hint) const {
  // Gauss-Newton on the residual x(s, y) - p; converges in a few steps from a
  // hint within the local chart.
  double s = std::clamp(s_hint, s0_, s1_);
  double y = 0.0;
  for (int it = 0; it < 50; ++it) {
    const SurfaceJet<double> j = jet(s, y);
    const Vec3<double> r = j.x - position;
    Eigen::Matrix<double, 3, 2> A;
    A.col(0) = j.xs;
    A.col(1) = j.xy;
    const Vec2<double> step = (A.transpose() * A).ldlt().solve(-A.transpose() * r);
    s = std::clamp(s + step(0), s0_, s1_);
    y = std::clamp(y + step(1), -options_.half_width, options_.half_width);
    if (step.norm() < 1e-13) break;
  }
  const SurfaceJet<double> j = jet(s, y);
  const Vec3<double> e1 = rotation.col(0);
  const Vec3<double> e2 = rotation.col(1);
  return ParametricPose{s, y, heading_angle(j, e1, e2)};
}

}  // namespace nonplanar
