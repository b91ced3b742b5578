#include "nonplanar/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

namespace nonplanar {

std::string to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::NonplanarMpc:
      return "nonplanar-mpc";
    case ControllerKind::PlanarMpc:
      return "planar-mpc";
    case ControllerKind::Stanley:
      return "stanley";
  }
  return "unknown";
}

ControllerKind parse_controller(const std::string& name) {
  if (name == "nonplanar-mpc") return ControllerKind::NonplanarMpc;
  if (name == "planar-mpc") return ControllerKind::PlanarMpc;
  if (name == "stanley") return ControllerKind::Stanley;
  throw std::invalid_argument("unknown controller '" + name +
                              "' (expected nonplanar-mpc, planar-mpc or stanley)");
}

void Scenario::validate() const {
  if (!(duration > 0.0)) throw std::invalid_argument("scenario duration must be positive");
  if (!(control_period > 0.0)) throw std::invalid_argument("control period must be positive");
  if (!std::isfinite(v_ref)) throw std::invalid_argument("v_ref must be finite");
  vehicle.validate();
  mpc.validate();
  speed_planner.validate();
  stanley.validate();
  for (const Segment& s : segments)
    if (!(s.s_begin < s.s_end)) throw std::invalid_argument("segment '" + s.name + "' is empty");
}

// ---------------------------------------------------------------------------
// YAML reading

namespace {

int line_of(const YAML::Node& n) { return n.IsDefined() ? n.Mark().line + 1 : 0; }

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& at, const std::string& msg) const {
    throw ParseError(source_, line_of(at), msg);
  }

  YAML::Node load(const std::string& text) const {
    try {
      YAML::Node root = YAML::Load(text);
      if (!root.IsMap()) throw ParseError(source_, line_of(root), "expected a mapping at the top level");
      return root;
    } catch (const YAML::ParserException& e) {
      throw ParseError(source_, e.mark.line + 1, e.msg);
    }
  }

  void only_keys(const YAML::Node& map, std::initializer_list<const char*> allowed) const {
    if (!map.IsMap()) fail(map, "expected a mapping");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& kv : map) {
      const std::string key = kv.first.as<std::string>();
      if (!ok.count(key)) fail(kv.first, "unknown key '" + key + "'");
    }
  }

  YAML::Node required(const YAML::Node& map, const char* key) const {
    const YAML::Node n = map[key];
    if (!n.IsDefined() || n.IsNull()) fail(map, std::string("missing key '") + key + "'");
    return n;
  }

  double number(const YAML::Node& n) const {
    if (!n.IsScalar()) fail(n, "expected a number");
    try {
      const double v = n.as<double>();
      if (!std::isfinite(v)) fail(n, "expected a finite number");
      return v;
    } catch (const YAML::BadConversion&) {
      fail(n, "expected a number, got '" + n.Scalar() + "'");
    }
  }

  double number(const YAML::Node& map, const char* key, double fallback) const {
    const YAML::Node n = map[key];
    return n.IsDefined() && !n.IsNull() ? number(n) : fallback;
  }

  int integer(const YAML::Node& map, const char* key, int fallback) const {
    const YAML::Node n = map[key];
    if (!n.IsDefined() || n.IsNull()) return fallback;
    try {
      return n.as<int>();
    } catch (const YAML::BadConversion&) {
      fail(n, "expected an integer, got '" + n.Scalar() + "'");
    }
  }

  bool boolean(const YAML::Node& map, const char* key, bool fallback) const {
    const YAML::Node n = map[key];
    if (!n.IsDefined() || n.IsNull()) return fallback;
    try {
      return n.as<bool>();
    } catch (const YAML::BadConversion&) {
      fail(n, "expected true or false, got '" + n.Scalar() + "'");
    }
  }

  std::string text(const YAML::Node& n) const {
    if (!n.IsScalar()) fail(n, "expected a string");
    return n.Scalar();
  }

  std::string text(const YAML::Node& map, const char* key, const std::string& fallback) const {
    const YAML::Node n = map[key];
    return n.IsDefined() && !n.IsNull() ? text(n) : fallback;
  }

  std::vector<double> numbers(const YAML::Node& n) const {
    if (!n.IsSequence()) fail(n, "expected a list of numbers");
    std::vector<double> out;
    out.reserve(n.size());
    for (const YAML::Node& v : n) out.push_back(number(v));
    return out;
  }

  std::vector<double> numbers(const YAML::Node& map, const char* key, std::size_t size) const {
    const YAML::Node n = required(map, key);
    std::vector<double> out = numbers(n);
    if (out.size() != size)
      fail(n, std::string("'") + key + "' has " + std::to_string(out.size()) + " entries, expected " +
                  std::to_string(size) + " (one per station)");
    return out;
  }

  const std::string& source() const { return source_; }

 private:
  std::string source_;
};

RoadSurface::Profile read_profile(const Reader& r, const YAML::Node& root) {
  const YAML::Node chart = r.required(root, "chart");
  const std::string kind = r.text(chart);
  const YAML::Node sn = r.required(root, "s");
  const std::vector<double> s = r.numbers(sn);
  if (s.size() < 2) r.fail(sn, "'s' needs at least two stations");
  for (std::size_t i = 1; i < s.size(); ++i)
    if (!(s[i] > s[i - 1])) r.fail(sn, "'s' must be strictly increasing");

  try {
    if (kind == "frenet") {
      return CurvatureProfile(s, r.numbers(root, "kappa", s.size()), r.number(root, "heading", 0.0));
    }
    if (kind == "tait-bryan") {
      const std::vector<double> b = root["b"].IsDefined() ? r.numbers(root, "b", s.size())
                                                          : std::vector<double>(s.size(), 0.0);
      const std::vector<double> c = root["c"].IsDefined() ? r.numbers(root, "c", s.size())
                                                          : std::vector<double>(s.size(), 0.0);
      if (root["kappa"].IsDefined()) {
        if (root["a"].IsDefined()) r.fail(root["a"], "give either 'a' or 'kappa', not both");
        const CurvatureProfile k(s, r.numbers(root, "kappa", s.size()), r.number(root, "heading", 0.0));
        return AngleProfile(k, b, c);
      }
      return AngleProfile(s, r.numbers(root, "a", s.size()), b, c);
    }
    if (kind == "darboux") {
      Mat3<double> frame = Mat3<double>::Identity();
      if (const YAML::Node f = root["initial_frame"]; f.IsDefined()) {
        if (!f.IsSequence() || f.size() != 3) r.fail(f, "'initial_frame' must be a 3x3 list of rows");
        for (int i = 0; i < 3; ++i) {
          const std::vector<double> row = r.numbers(f[i]);
          if (row.size() != 3) r.fail(f[i], "'initial_frame' rows need three entries");
          for (int j = 0; j < 3; ++j) frame(i, j) = row[j];
        }
        if (!(frame.transpose() * frame - Mat3<double>::Identity()).isZero(1e-9) || frame.determinant() < 0)
          r.fail(f, "'initial_frame' must be a rotation matrix");
      }
      return DarbouxProfile(s, r.numbers(root, "ks", s.size()), r.numbers(root, "ky", s.size()),
                            r.numbers(root, "kn", s.size()), frame);
    }
  } catch (const std::invalid_argument& e) {
    r.fail(chart, e.what());
  }
  r.fail(chart, "unknown chart '" + kind + "' (expected frenet, tait-bryan or darboux)");
}

Vec3<double> read_vec3(const Reader& r, const YAML::Node& n) {
  const std::vector<double> v = r.numbers(n);
  if (v.size() != 3) r.fail(n, "expected three numbers");
  return {v[0], v[1], v[2]};
}

}  // namespace

RoadSurface parse_road(const std::string& text, const std::string& source) {
  const Reader r(source);
  const YAML::Node root = r.load(text);
  r.only_keys(root, {"name", "chart", "s", "kappa", "heading", "a", "b", "c", "ks", "ky", "kn",
                     "initial_frame", "half_width", "com_height", "anchor"});
  RoadOptions o;
  o.name = r.text(root, "name", "");
  o.half_width = r.number(root, "half_width", o.half_width);
  if (!(o.half_width > 0.0)) r.fail(root["half_width"], "'half_width' must be positive");
  o.com_height = r.number(root, "com_height", o.com_height);
  if (root["anchor"].IsDefined()) o.anchor = read_vec3(r, root["anchor"]);
  RoadSurface::Profile profile = read_profile(r, root);
  return RoadSurface(std::move(profile), o);
}

namespace {

std::string read_text(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ParseError(file.string(), 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

RoadSurface load_road(const std::filesystem::path& file) {
  return parse_road(read_text(file), file.string());
}

Scenario parse_scenario(const std::string& text, const std::string& source,
                        const std::filesystem::path& base_dir) {
  const Reader r(source);
  const YAML::Node root = r.load(text);
  r.only_keys(root, {"name", "road", "controller", "v_ref", "duration", "control_period", "planner",
                     "integrator", "initial", "vehicle", "mpc", "speed_planner", "stanley", "segments"});
  Scenario sc;
  sc.name = r.text(root, "name", "scenario");
  const YAML::Node road = r.required(root, "road");
  sc.road_file = r.text(road);
  if (sc.road_file.is_relative() && !base_dir.empty()) sc.road_file = base_dir / sc.road_file;

  if (const YAML::Node c = root["controller"]; c.IsDefined()) {
    try {
      sc.controller = parse_controller(r.text(c));
    } catch (const std::invalid_argument& e) {
      r.fail(c, e.what());
    }
  }
  sc.v_ref = r.number(root, "v_ref", sc.v_ref);
  sc.duration = r.number(root, "duration", sc.duration);
  if (!(sc.duration > 0.0)) r.fail(root["duration"], "'duration' must be positive");
  sc.control_period = r.number(root, "control_period", sc.control_period);
  if (!(sc.control_period > 0.0)) r.fail(root["control_period"], "'control_period' must be positive");
  sc.planner = r.boolean(root, "planner", sc.planner);

  const std::string integ = r.text(root, "integrator", "rk45");
  if (integ == "rk45") sc.integrator = Integrator::AdaptiveRk45;
  else if (integ == "rk4") sc.integrator = Integrator::FixedRk4;
  else r.fail(root["integrator"], "unknown integrator '" + integ + "' (expected rk45 or rk4)");

  if (const YAML::Node n = root["initial"]; n.IsDefined()) {
    r.only_keys(n, {"s", "y", "theta_s", "v"});
    sc.initial.pose.s = r.number(n, "s", sc.initial.pose.s);
    sc.initial.pose.y = r.number(n, "y", sc.initial.pose.y);
    sc.initial.pose.theta = r.number(n, "theta_s", sc.initial.pose.theta);
    sc.initial.v = r.number(n, "v", sc.v_ref);
  } else {
    sc.initial.v = sc.v_ref;
  }

  if (const YAML::Node n = root["vehicle"]; n.IsDefined()) {
    r.only_keys(n, {"m", "lf", "lr", "a_min", "a_max", "gamma_min", "gamma_max", "com_height", "g"});
    VehicleParams& p = sc.vehicle;
    p.m = r.number(n, "m", p.m);
    p.lf = r.number(n, "lf", p.lf);
    p.lr = r.number(n, "lr", p.lr);
    p.a_min = r.number(n, "a_min", p.a_min);
    p.a_max = r.number(n, "a_max", p.a_max);
    p.gamma_min = r.number(n, "gamma_min", p.gamma_min);
    p.gamma_max = r.number(n, "gamma_max", p.gamma_max);
    p.com_height = r.number(n, "com_height", p.com_height);
    p.g = r.number(n, "g", p.g);
  }
  if (const YAML::Node n = root["mpc"]; n.IsDefined()) {
    r.only_keys(n, {"horizon", "step", "w_y", "w_theta", "w_v", "w_da", "w_dgamma", "kkt_tol",
                    "max_iterations"});
    MpcConfig& m = sc.mpc;
    m.horizon = r.integer(n, "horizon", m.horizon);
    m.step = r.number(n, "step", m.step);
    m.w_y = r.number(n, "w_y", m.w_y);
    m.w_theta = r.number(n, "w_theta", m.w_theta);
    m.w_v = r.number(n, "w_v", m.w_v);
    m.w_da = r.number(n, "w_da", m.w_da);
    m.w_dgamma = r.number(n, "w_dgamma", m.w_dgamma);
    m.sqp.kkt_tol = r.number(n, "kkt_tol", m.sqp.kkt_tol);
    m.sqp.max_iterations = r.integer(n, "max_iterations", m.sqp.max_iterations);
  }
  if (const YAML::Node n = root["speed_planner"]; n.IsDefined()) {
    r.only_keys(n, {"lookahead", "f_min", "f_max", "margin", "rate_weight", "samples", "v_max"});
    SpeedPlannerConfig& p = sc.speed_planner;
    p.lookahead = r.number(n, "lookahead", p.lookahead);
    p.f_min = r.number(n, "f_min", p.f_min);
    p.f_max = r.number(n, "f_max", p.f_max);
    p.margin = r.number(n, "margin", p.margin);
    p.rate_weight = r.number(n, "rate_weight", p.rate_weight);
    p.samples = r.integer(n, "samples", p.samples);
    p.v_max = r.number(n, "v_max", p.v_max);
  }
  if (const YAML::Node n = root["stanley"]; n.IsDefined()) {
    r.only_keys(n, {"k", "softening", "speed_gain"});
    sc.stanley.k = r.number(n, "k", sc.stanley.k);
    sc.stanley.softening = r.number(n, "softening", sc.stanley.softening);
    sc.stanley.speed_gain = r.number(n, "speed_gain", sc.stanley.speed_gain);
  }
  if (const YAML::Node n = root["segments"]; n.IsDefined()) {
    if (!n.IsSequence()) r.fail(n, "'segments' must be a list");
    for (const YAML::Node& seg : n) {
      r.only_keys(seg, {"name", "s"});
      const YAML::Node range = r.required(seg, "s");
      const std::vector<double> v = r.numbers(range);
      if (v.size() != 2 || !(v[0] < v[1])) r.fail(range, "segment 's' must be [start, end] with start < end");
      sc.segments.push_back({r.text(r.required(seg, "name")), v[0], v[1]});
    }
  }

  try {
    sc.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(source, 0, e.what());
  }
  return sc;
}

Scenario load_scenario(const std::filesystem::path& file) {
  return parse_scenario(read_text(file), file.string(), file.parent_path());
}

// ---------------------------------------------------------------------------
// Runs

std::unique_ptr<Controller> make_controller(const Scenario& sc, const RoadSurface& road) {
  MpcConfig mpc = sc.mpc;
  mpc.v_ref = sc.v_ref;
  switch (sc.controller) {
    case ControllerKind::NonplanarMpc: {
      mpc.model = PredictionModel::Nonplanar;
      mpc.gravity_feed_forward = false;
      std::optional<SpeedPlannerConfig> planner;
      if (sc.planner) planner = sc.speed_planner;
      return std::make_unique<MpcController>(road, sc.vehicle, mpc, planner);
    }
    case ControllerKind::PlanarMpc:
      mpc.model = PredictionModel::Planar;
      mpc.gravity_feed_forward = true;
      return std::make_unique<MpcController>(road, sc.vehicle, mpc);
    case ControllerKind::Stanley: {
      StanleyConfig st = sc.stanley;
      st.v_ref = sc.v_ref;
      return std::make_unique<StanleyController>(road, sc.vehicle, st);
    }
  }
  throw std::invalid_argument("unknown controller kind");
}

RunMetrics compute_metrics(const std::vector<LogRow>& log, const Scenario& sc, double f_min,
                           double f_max) {
  RunMetrics m;
  m.steps = static_cast<long>(log.size());
  for (const Segment& s : sc.segments) m.segments.push_back({s.name, 0, 0.0, 0.0, 0});
  if (log.empty()) return m;

  double sy = 0.0, sv = 0.0, ms = 0.0;
  m.min_normal_force = log.front().normal_force;
  m.max_normal_force = log.front().normal_force;
  for (const LogRow& r : log) {
    const double ay = std::abs(r.state.pose.y);
    const double fn = r.normal_force;
    sy += ay * ay;
    m.max_abs_y = std::max(m.max_abs_y, ay);
    const double dv = r.state.v - sc.v_ref;
    sv += dv * dv;
    m.min_normal_force = std::min(m.min_normal_force, fn);
    m.max_normal_force = std::max(m.max_normal_force, fn);
    const bool out_of_band = fn < f_min || fn > f_max;
    m.below_band += fn < f_min;
    m.above_band += fn > f_max;
    m.band_violations += out_of_band;
    m.lost_contact += fn <= 0.0;
    ms += r.solve_ms;
    m.max_solve_ms = std::max(m.max_solve_ms, r.solve_ms);
    m.fallbacks += r.status.find("fallback") != std::string::npos;
    for (std::size_t i = 0; i < sc.segments.size(); ++i) {
      const Segment& seg = sc.segments[i];
      if (r.state.pose.s < seg.s_begin || r.state.pose.s > seg.s_end) continue;
      SegmentMetrics& sm = m.segments[i];
      ++sm.steps;
      sm.rms_abs_y += ay * ay;
      sm.max_abs_y = std::max(sm.max_abs_y, ay);
      sm.band_violations += out_of_band;
    }
  }
  const double n = static_cast<double>(log.size());
  m.rms_abs_y = std::sqrt(sy / n);
  m.rms_speed_error = std::sqrt(sv / n);
  m.mean_solve_ms = ms / n;
  for (SegmentMetrics& sm : m.segments)
    if (sm.steps > 0) sm.rms_abs_y = std::sqrt(sm.rms_abs_y / sm.steps);
  return m;
}

RunResult run_scenario(const Scenario& sc, const RoadSurface& road, const RowObserver& observer) {
  sc.validate();
  road.check_domain(sc.initial.pose.s, sc.initial.pose.y);
  RunResult out;
  out.controller = to_string(sc.controller);
  std::unique_ptr<Controller> controller = make_controller(sc, road);
  const Policy policy = [&](const VehicleState& x, double t) {
    ControlDecision d = controller->decide(x, t);
    if (observer) {
      LogRow row = make_log_row(road, sc.vehicle, t, x, saturate(d.input, sc.vehicle));
      row.v_ref_adj = d.v_ref_adj;
      row.solve_ms = d.solve_ms;
      row.status = d.status;
      observer(row);
    }
    return d;
  };
  SimulationOptions o;
  o.dt = sc.control_period;
  o.duration = sc.duration;
  o.integrator = sc.integrator;
  try {
    simulate_into(road, sc.vehicle, sc.initial, policy, o, out.log);
  } catch (const SimulationDiverged& e) {
    out.completed = false;
    out.error = e.what();
  }
  out.metrics = compute_metrics(out.log, sc);
  return out;
}

// ---------------------------------------------------------------------------
// Output

namespace {

void append_number(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v == 0.0 ? 0.0 : v);  // no "-0"
  out += buf;
}

}  // namespace

std::string trajectory_csv(const std::vector<LogRow>& log, bool deterministic) {
  std::string out = kCsvHeader;
  out += '\n';
  for (const LogRow& r : log) {
    const double fields[] = {r.t,           r.state.pose.s, r.state.pose.y, r.state.pose.theta,
                             r.state.v,     r.beta,         r.input.a_t,    r.input.gamma,
                             r.normal_force, r.position(0), r.position(1),  r.position(2),
                             r.v_ref_adj,   deterministic ? 0.0 : r.solve_ms};
    for (double f : fields) {
      append_number(out, f);
      out += ',';
    }
    out += r.status;
    out += '\n';
  }
  return out;
}

std::string metrics_json(const Scenario& sc, const std::vector<RunResult>& runs, bool deterministic) {
  nlohmann::ordered_json doc;
  doc["scenario"] = sc.name;
  doc["road"] = sc.road_file.filename().string();
  doc["v_ref"] = sc.v_ref;
  doc["duration"] = sc.duration;
  doc["band"] = {kBandMin, kBandMax};
  doc["runs"] = nlohmann::ordered_json::array();
  for (const RunResult& r : runs) {
    const RunMetrics& m = r.metrics;
    nlohmann::ordered_json j;
    j["controller"] = r.controller;
    j["completed"] = r.completed;
    if (!r.error.empty()) j["error"] = r.error;
    j["steps"] = m.steps;
    j["rms_abs_y"] = m.rms_abs_y;
    j["max_abs_y"] = m.max_abs_y;
    j["rms_speed_error"] = m.rms_speed_error;
    j["min_normal_force"] = m.min_normal_force;
    j["max_normal_force"] = m.max_normal_force;
    j["band_violations"] = m.band_violations;
    j["below_band"] = m.below_band;
    j["above_band"] = m.above_band;
    j["lost_contact"] = m.lost_contact;
    j["mean_solve_ms"] = deterministic ? 0.0 : m.mean_solve_ms;
    j["max_solve_ms"] = deterministic ? 0.0 : m.max_solve_ms;
    j["fallbacks"] = m.fallbacks;
    j["segments"] = nlohmann::ordered_json::array();
    for (const SegmentMetrics& s : m.segments) {
      j["segments"].push_back({{"name", s.name},
                               {"steps", s.steps},
                               {"rms_abs_y", s.rms_abs_y},
                               {"max_abs_y", s.max_abs_y},
                               {"band_violations", s.band_violations}});
    }
    doc["runs"].push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

std::string metrics_table(const std::vector<RunResult>& runs) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-14s %9s %9s %9s %10s %10s %6s %6s %9s %9s  %s\n", "controller",
                "rms|y|", "max|y|", "rms dv", "min F_N", "max F_N", "band", "lost", "mean ms",
                "max ms", "status");
  out += buf;
  for (const RunResult& r : runs) {
    const RunMetrics& m = r.metrics;
    std::snprintf(buf, sizeof buf, "%-14s %9.4f %9.4f %9.4f %10.1f %10.1f %6ld %6ld %9.2f %9.2f  %s\n",
                  r.controller.c_str(), m.rms_abs_y, m.max_abs_y, m.rms_speed_error,
                  m.min_normal_force, m.max_normal_force, m.band_violations, m.lost_contact,
                  m.mean_solve_ms, m.max_solve_ms, r.completed ? "ok" : "diverged");
    out += buf;
    for (const SegmentMetrics& s : m.segments) {
      const std::string label = "  [" + s.name + "]";
      std::snprintf(buf, sizeof buf, "%-14s %9.4f %9.4f %9s %10s %10s %6ld\n", label.c_str(),
                    s.rms_abs_y, s.max_abs_y, "", "", "", s.band_violations);
      out += buf;
    }
  }
  return out;
}

void write_file_atomic(const std::filesystem::path& file, const std::string& contents) {
  std::filesystem::path tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, file);
}

}  // namespace nonplanar
