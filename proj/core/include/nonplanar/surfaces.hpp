#pragma once

// Centerline road surfaces x(s, y) = x_c(s) + y e_y(s) in three flavours:
// planar Frenet (curvature profile), Tait-Bryan angles (heading, slope, bank)
// and Darboux frame curvatures.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "nonplanar/dual.hpp"
#include "nonplanar/errors.hpp"
#include "nonplanar/geom.hpp"
#include "nonplanar/spline.hpp"

namespace nonplanar {

enum class RoadKind { Frenet, TaitBryan, Darboux };

std::string to_string(RoadKind kind);

// ---------------------------------------------------------------------------
// Tait-Bryan rotations

/// Heading a, slope b, bank c and their first two arc-length derivatives.
template <class T>
struct AngleJet {
  T a, b, c;
  T da, db, dc;
  T dda, ddb, ddc;
};

namespace detail {

// Elementary rotations and their first/second angle derivatives.
template <class T>
Mat3<T> rot_a(const T& t, int order) {
  const T c = cos(t), s = sin(t);
  Mat3<T> m = Mat3<T>::Zero();
  if (order == 0) {
    m << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  } else if (order == 1) {
    m << -s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0;
  } else {
    m << -c, s, 0.0, -s, -c, 0.0, 0.0, 0.0, 0.0;
  }
  return m;
}

template <class T>
Mat3<T> rot_b(const T& t, int order) {
  const T c = cos(t), s = sin(t);
  Mat3<T> m = Mat3<T>::Zero();
  if (order == 0) {
    m << c, 0.0, -s, 0.0, 1.0, 0.0, s, 0.0, c;
  } else if (order == 1) {
    m << -s, 0.0, -c, 0.0, 0.0, 0.0, c, 0.0, -s;
  } else {
    m << -c, 0.0, s, 0.0, 0.0, 0.0, -s, 0.0, -c;
  }
  return m;
}

template <class T>
Mat3<T> rot_c(const T& t, int order) {
  const T c = cos(t), s = sin(t);
  Mat3<T> m = Mat3<T>::Zero();
  if (order == 0) {
    m << 1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c;
  } else if (order == 1) {
    m << 0.0, 0.0, 0.0, 0.0, -s, -c, 0.0, c, -s;
  } else {
    m << 0.0, 0.0, 0.0, 0.0, -c, s, 0.0, -s, -c;
  }
  return m;
}

template <class T>
Vec3<T> lift(const Vec3<double>& value, const Vec3<double>& slope, const T& s) {
  return Vec3<T>(first_order(value(0), slope(0), s), first_order(value(1), slope(1), s),
                 first_order(value(2), slope(2), s));
}

}  // namespace detail

/// R = Ra(a) Rb(b) Rc(c) with columns (e_s, e_y, e_n).
template <class T>
Mat3<T> frame_from_angles(const T& a, const T& b, const T& c) {
  return detail::rot_a(a, 0) * detail::rot_b(b, 0) * detail::rot_c(c, 0);
}

/// A centerline frame and its first two arc-length derivatives.
template <class T>
struct CenterlineFrame {
  Mat3<T> R;    // columns e_s, e_y, e_n
  Mat3<T> dR;   // d/ds
  Mat3<T> ddR;  // d2/ds2

  Vec3<T> es() const { return R.col(0); }
  Vec3<T> ey() const { return R.col(1); }
  Vec3<T> en() const { return R.col(2); }
};

/// Frame and derivatives by the product rule on Ra Rb Rc.
template <class T>
CenterlineFrame<T> frame_from_angle_jet(const AngleJet<T>& q) {
  using detail::rot_a;
  using detail::rot_b;
  using detail::rot_c;
  const Mat3<T> A = rot_a(q.a, 0), B = rot_b(q.b, 0), C = rot_c(q.c, 0);
  const Mat3<T> Ad = rot_a(q.a, 1) * q.da, Bd = rot_b(q.b, 1) * q.db, Cd = rot_c(q.c, 1) * q.dc;
  const Mat3<T> Add = rot_a(q.a, 2) * (q.da * q.da) + rot_a(q.a, 1) * q.dda;
  const Mat3<T> Bdd = rot_b(q.b, 2) * (q.db * q.db) + rot_b(q.b, 1) * q.ddb;
  const Mat3<T> Cdd = rot_c(q.c, 2) * (q.dc * q.dc) + rot_c(q.c, 1) * q.ddc;
  CenterlineFrame<T> f;
  f.R = A * B * C;
  f.dR = Ad * B * C + A * Bd * C + A * B * Cd;
  f.ddR = Add * B * C + A * Bdd * C + A * B * Cdd +
          2.0 * (Ad * Bd * C + Ad * B * Cd + A * Bd * Cd);
  return f;
}

/// Darboux curvatures (torsion ks, normal curvature ky, geodesic curvature
/// kn) and their arc-length derivatives.
template <class T>
struct DarbouxJet {
  T ks, ky, kn;
  T dks, dky, dkn;
};

/// Darboux curvatures of the Tait-Bryan frame, defined by R' = R W with
/// W = [[0, -kn, ky], [kn, 0, -ks], [-ky, ks, 0]].
template <class T>
DarbouxJet<T> tait_bryan_to_darboux(const AngleJet<T>& q) {
  const T sb = sin(q.b), cb = cos(q.b), sc = sin(q.c), cc = cos(q.c);
  DarbouxJet<T> k;
  k.ks = q.da * sb + q.dc;
  k.ky = q.da * sc * cb - q.db * cc;
  k.kn = q.da * cb * cc + q.db * sc;
  k.dks = q.dda * sb + q.da * q.db * cb + q.ddc;
  k.dky = q.dda * sc * cb + q.da * q.dc * cc * cb - q.da * q.db * sc * sb - q.ddb * cc +
          q.db * q.dc * sc;
  k.dkn = q.dda * cb * cc - q.da * q.db * sb * cc - q.da * q.dc * cb * sc + q.ddb * sc +
          q.db * q.dc * cc;
  return k;
}

/// Skew generator W with R' = R W.
template <class T>
Mat3<T> darboux_generator(const T& ks, const T& ky, const T& kn) {
  Mat3<T> w;
  w << T(0.0), -kn, ky, kn, T(0.0), -ks, -ky, ks, T(0.0);
  return w;
}

// ---------------------------------------------------------------------------
// Profiles

/// Planar curvature with heading psi(s) = psi0 + integral of kappa.
class CurvatureProfile {
 public:
  CurvatureProfile(std::vector<double> s, std::vector<double> kappa, double initial_heading = 0.0);

  const std::vector<double>& breakpoints() const { return k_.knots(); }
  double s_begin() const { return k_.front(); }
  double s_end() const { return k_.back(); }
  double initial_heading() const { return psi0_; }
  const CubicSpline& spline() const { return k_; }

  template <class T>
  T kappa(const T& s) const {
    return k_.value(s);
  }
  template <class T>
  T dkappa(const T& s) const {
    return k_.derivative(s);
  }
  template <class T>
  T heading(const T& s) const {
    return psi0_ + k_.integral(s);
  }

 private:
  CubicSpline k_;
  double psi0_;
};

/// Heading, slope and bank angles on shared breakpoints. The heading is
/// either interpolated from samples or the exact integral of a curvature
/// profile (so a'(s) equals that curvature).
class AngleProfile {
 public:
  AngleProfile(std::vector<double> s, std::vector<double> a, std::vector<double> b,
               std::vector<double> c);
  AngleProfile(const CurvatureProfile& heading_rate, std::vector<double> b, std::vector<double> c);

  const std::vector<double>& breakpoints() const { return b_.knots(); }
  double s_begin() const { return b_.front(); }
  double s_end() const { return b_.back(); }
  const CubicSpline& slope() const { return b_; }
  const CubicSpline& bank() const { return c_; }
  const std::optional<CurvatureProfile>& heading_rate() const { return rate_; }

  template <class T>
  T heading(const T& s) const {
    return rate_ ? rate_->heading(s) : a_.value(s);
  }

  template <class T>
  AngleJet<T> evaluate(const T& s) const {
    AngleJet<T> q;
    if (rate_) {
      q.a = rate_->heading(s);
      q.da = rate_->kappa(s);
      q.dda = rate_->dkappa(s);
    } else {
      q.a = a_.value(s);
      q.da = a_.derivative(s);
      q.dda = a_.second_derivative(s);
    }
    q.b = b_.value(s);
    q.c = c_.value(s);
    q.db = b_.derivative(s);
    q.dc = c_.derivative(s);
    q.ddb = b_.second_derivative(s);
    q.ddc = c_.second_derivative(s);
    return q;
  }

 private:
  CubicSpline a_, b_, c_;
  std::optional<CurvatureProfile> rate_;
};

/// Converted curvatures (ks, ky, kn) of an angle profile at s.
Vec3<double> tait_bryan_to_darboux(const AngleProfile& profile, double s);

/// Torsion, normal and geodesic curvature of the centerline frame, either
/// interpolated from samples or converted exactly from an angle profile.
class DarbouxProfile {
 public:
  DarbouxProfile(std::vector<double> s, std::vector<double> ks, std::vector<double> ky,
                 std::vector<double> kn, const Mat3<double>& initial_frame = Mat3<double>::Identity());

  /// Exact conversion; the initial frame is the Tait-Bryan frame at s_0.
  static DarbouxProfile from_angles(const AngleProfile& angles);

  const std::vector<double>& breakpoints() const { return breakpoints_; }
  double s_begin() const { return breakpoints_.front(); }
  double s_end() const { return breakpoints_.back(); }
  const Mat3<double>& initial_frame() const { return frame0_; }

  template <class T>
  DarbouxJet<T> evaluate(const T& s) const {
    if (angles_) return tait_bryan_to_darboux(angles_->evaluate(s));
    return DarbouxJet<T>{ks_.value(s),      ky_.value(s),      kn_.value(s),
                         ks_.derivative(s), ky_.derivative(s), kn_.derivative(s)};
  }

 private:
  explicit DarbouxProfile(const AngleProfile& angles);

  std::vector<double> breakpoints_;
  std::optional<AngleProfile> angles_;
  CubicSpline ks_, ky_, kn_;
  Mat3<double> frame0_;
};

// ---------------------------------------------------------------------------
// Road surface

struct RoadOptions {
  Vec3<double> anchor = Vec3<double>::Zero();  // x_c(s_0)
  double half_width = 4.0;                     // y_max (m)
  double com_height = 0.592;                   // metadata only (m)
  std::string name;
};

/// Immutable centerline surface with a declared parameter domain
/// [s_0, s_N] x [-y_max, y_max]. Regularity is checked on a grid at
/// construction (0.5 m in s, 4 lateral nodes).
class RoadSurface {
 public:
  using Profile = std::variant<CurvatureProfile, AngleProfile, DarbouxProfile>;

  explicit RoadSurface(Profile profile, RoadOptions options = {});

  RoadKind kind() const;
  const Profile& profile() const { return profile_; }
  const RoadOptions& options() const { return options_; }
  double s_begin() const { return s0_; }
  double s_end() const { return s1_; }
  double half_width() const { return options_.half_width; }
  double com_height() const { return options_.com_height; }
  const std::string& name() const { return options_.name; }

  bool contains(double s, double y) const;
  /// Throws DomainError outside the parameter domain.
  void check_domain(double s, double y) const;

  /// Centerline frame (e_s, e_y, e_n) and its s-derivatives at s.
  template <class T>
  CenterlineFrame<T> frame(const T& s) const;

  /// Surface jet with analytic partials; DomainError outside the domain.
  template <class T>
  SurfaceJet<T> jet(const T& s, const T& y) const;

  SurfaceJet<double> evaluate_jet(double s, double y) const { return jet<double>(s, y); }

  /// Fixed-step quadrature of e_s from s_0, x_c(s_0) = anchor.
  Vec3<double> centerline_position(double s) const;

  /// Curvature a planar map of this road would report: kappa (Frenet),
  /// a'(s) (Tait-Bryan) or kn (Darboux).
  template <class T>
  T planar_curvature(const T& s) const;
  double planar_curvature_rate(double s) const;

  /// Global position and body rotation [e1 | e2 | e3] of a parametric pose.
  struct GlobalPose {
    Vec3<double> position;
    Mat3<double> rotation;
  };
  GlobalPose global_pose(const ParametricPose& pose) const;

  /// Inverse of global_pose: Newton projection of the position onto the chart
  /// starting from s_hint, then the heading angle of the body axes.
  ParametricPose tangent_contact_pose(const Vec3<double>& position, const Mat3<double>& rotation,
                                      double s_hint) const;

 private:
  struct Node {
    double s;
    Vec3<double> x;
    Mat3<double> R;  // used by the Darboux chart only
  };

  void build_nodes();
  void check_regularity() const;
  std::size_t node_index(double s) const;
  Vec3<double> centerline_es(double s) const;
  /// One RK4 step of (R, x) under R' = R W, x' = e_s.
  void darboux_step(double s, double h, Mat3<double>& R, Vec3<double>& x) const;
  /// Frame and position on the Darboux chart at double s.
  void darboux_state(double s, Mat3<double>& R, Vec3<double>& x) const;

  Profile profile_;
  RoadOptions options_;
  double s0_ = 0.0;
  double s1_ = 0.0;
  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Template definitions

template <class T>
CenterlineFrame<T> RoadSurface::frame(const T& s) const {
  const double sv = value_of(s);
  if (!(sv >= s0_ && sv <= s1_)) throw DomainError("s outside road domain");
  CenterlineFrame<T> f;
  if (const auto* p = std::get_if<CurvatureProfile>(&profile_)) {
    const T psi = p->heading(s);
    const T k = p->kappa(s);
    const T dk = p->dkappa(s);
    const T c = cos(psi), sn = sin(psi);
    const T zero(0.0), one(1.0);
    f.R << c, -sn, zero, sn, c, zero, zero, zero, one;
    f.dR << -sn * k, -c * k, zero, c * k, -sn * k, zero, zero, zero, zero;
    f.ddR << -c * k * k - sn * dk, sn * k * k - c * dk, zero, -sn * k * k + c * dk,
        -c * k * k - sn * dk, zero, zero, zero, zero;
    return f;
  }
  if (const auto* p = std::get_if<AngleProfile>(&profile_)) {
    return frame_from_angle_jet(p->evaluate(s));
  }
  const auto& p = std::get<DarbouxProfile>(profile_);
  Mat3<double> R;
  Vec3<double> x;
  darboux_state(sv, R, x);
  const DarbouxJet<double> kv = p.evaluate(sv);
  const Mat3<double> dRv = R * darboux_generator(kv.ks, kv.ky, kv.kn);
  Mat3<T> Rt;
  for (int c = 0; c < 3; ++c) Rt.col(c) = detail::lift(Vec3<double>(R.col(c)), Vec3<double>(dRv.col(c)), s);
  const DarbouxJet<T> k = p.evaluate(s);
  const Mat3<T> W = darboux_generator(k.ks, k.ky, k.kn);
  const Mat3<T> dW = darboux_generator(k.dks, k.dky, k.dkn);
  f.R = Rt;
  f.dR = Rt * W;
  f.ddR = f.dR * W + Rt * dW;
  return f;
}

template <class T>
T RoadSurface::planar_curvature(const T& s) const {
  if (const auto* p = std::get_if<CurvatureProfile>(&profile_)) return p->kappa(s);
  if (const auto* p = std::get_if<AngleProfile>(&profile_)) return p->evaluate(s).da;
  return std::get<DarbouxProfile>(profile_).evaluate(s).kn;
}

template <class T>
SurfaceJet<T> RoadSurface::jet(const T& s, const T& y) const {
  check_domain(value_of(s), value_of(y));
  const Vec3<T> zero = Vec3<T>::Zero();
  const double sv = value_of(s);

  if (const auto* p = std::get_if<CurvatureProfile>(&profile_)) {
    // Planar Frenet chart, closed forms.
    const T psi = p->heading(s);
    const T k = p->kappa(s);
    const T dk = p->dkappa(s);
    const Vec3<T> es(cos(psi), sin(psi), T(0.0));
    const Vec3<T> ey(-sin(psi), cos(psi), T(0.0));
    const T stretch = 1.0 - y * k;
    const Vec3<T> x = detail::lift(centerline_position(sv), Vec3<double>(value_of(es(0)), value_of(es(1)), 0.0), s) + y * ey;
    const Vec3<T> xs = stretch * es;
    const Vec3<T> xss = (-y * dk) * es + (stretch * k) * ey;
    const Vec3<T> xsy = -k * es;
    return make_jet<T>(x, xs, ey, xss, xsy, zero);
  }

  if (const auto* p = std::get_if<DarbouxProfile>(&profile_)) {
    // Frame-coordinate forms of the Darboux chart.
    Mat3<double> R;
    Vec3<double> xc;
    darboux_state(sv, R, xc);
    const DarbouxJet<double> kv = p->evaluate(sv);
    const Mat3<double> dRv = R * darboux_generator(kv.ks, kv.ky, kv.kn);
    const Vec3<T> es = detail::lift(Vec3<double>(R.col(0)), Vec3<double>(dRv.col(0)), s);
    const Vec3<T> ey = detail::lift(Vec3<double>(R.col(1)), Vec3<double>(dRv.col(1)), s);
    const Vec3<T> en = detail::lift(Vec3<double>(R.col(2)), Vec3<double>(dRv.col(2)), s);
    const DarbouxJet<T> k = p->evaluate(s);
    const Vec3<T> x = detail::lift(xc, Vec3<double>(R.col(0)), s) + y * ey;
    const Vec3<T> xs = (1.0 - y * k.kn) * es + (y * k.ks) * en;
    const Vec3<T> xss = (y * (k.ks * k.ky - k.dkn)) * es +
                        (k.kn - y * (k.ks * k.ks + k.kn * k.kn)) * ey +
                        (-k.ky + y * (k.dks + k.ky * k.kn)) * en;
    const Vec3<T> xsy = -k.kn * es + k.ks * en;
    return make_jet<T>(x, xs, ey, xss, xsy, zero);
  }

  // Tait-Bryan chart: generic centerline partials.
  const CenterlineFrame<T> f = frame(s);
  const Vec3<T> es = f.R.col(0), ey = f.R.col(1);
  const Vec3<T> des = f.dR.col(0), dey = f.dR.col(1), ddey = f.ddR.col(1);
  const Vec3<T> x = detail::lift(centerline_position(sv), centerline_es(sv), s) + y * ey;
  return make_jet<T>(x, es + y * dey, ey, des + y * ddey, dey, zero);
}

}  // namespace nonplanar
