#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "nonplanar/scenario.hpp"

using namespace nonplanar;
namespace fs = std::filesystem;

namespace {

const char* kFlatRoad = R"(name: straight
chart: frenet
half_width: 3.5
s: [0, 100, 200]
kappa: [0, 0, 0]
)";

int line_of_error(const std::string& text) {
  try {
    parse_road(text, "road.yaml");
  } catch (const ParseError& e) {
    EXPECT_EQ(e.file(), "road.yaml");
    return e.line();
  }
  ADD_FAILURE() << "no ParseError for:\n" << text;
  return -1;
}

int scenario_error_line(const std::string& text) {
  try {
    parse_scenario(text, "sc.yaml");
  } catch (const ParseError& e) {
    return e.line();
  }
  ADD_FAILURE() << "no ParseError for:\n" << text;
  return -1;
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nonplanar_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

LogRow row(double t, double s, double y, double v, double fn, double ms = 0.0, std::string status = "ok") {
  LogRow r;
  r.t = t;
  r.state = {v, {s, y, 0.0}};
  r.normal_force = fn;
  r.solve_ms = ms;
  r.status = std::move(status);
  return r;
}

}  // namespace

TEST(RoadFile, ParsesEachChart) {
  const RoadSurface flat = parse_road(kFlatRoad);
  EXPECT_EQ(flat.kind(), RoadKind::Frenet);
  EXPECT_EQ(flat.name(), "straight");
  EXPECT_DOUBLE_EQ(flat.half_width(), 3.5);
  EXPECT_DOUBLE_EQ(flat.s_end(), 200.0);

  const RoadSurface tb = parse_road(R"(chart: tait-bryan
s: [0, 50]
kappa: [0.01, 0.01]
c: [-0.2, -0.2]
anchor: [1, 2, 3]
)");
  EXPECT_EQ(tb.kind(), RoadKind::TaitBryan);
  EXPECT_NEAR((tb.centerline_position(0.0) - Vec3<double>(1, 2, 3)).norm(), 0.0, 1e-12);
  EXPECT_NEAR(tb.planar_curvature(10.0), 0.01, 1e-12);

  const RoadSurface db = parse_road(R"(chart: darboux
s: [0, 10]
ks: [0, 0]
ky: [-0.05, -0.05]
kn: [0, 0]
initial_frame: [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
)");
  EXPECT_EQ(db.kind(), RoadKind::Darboux);
}

TEST(RoadFile, ErrorsCarryLineNumbers) {
  EXPECT_EQ(line_of_error("chart: frenet\ns: [0, 1]\nkappa: [0, 0]\nwidth: 3\n"), 4);
  EXPECT_EQ(line_of_error("chart: frenet\ns: [0, 1]\nkappa: [0, zero]\n"), 3);
  EXPECT_EQ(line_of_error("chart: frenet\ns: [0, 1, 2]\nkappa: [0, 0]\n"), 3);
  EXPECT_EQ(line_of_error("chart: frenet\ns: [0, 2, 1]\nkappa: [0, 0, 0]\n"), 2);
  EXPECT_EQ(line_of_error("name: x\nchart: helix\ns: [0, 1]\n"), 2);
  EXPECT_EQ(line_of_error("chart: frenet\ns: [0, 1\nkappa: [0, 0]\n"), 3);  // unclosed list
  EXPECT_EQ(line_of_error("chart: frenet\nkappa: [0, 0]\n"), 1);            // missing s
  EXPECT_EQ(line_of_error("chart: tait-bryan\ns: [0, 1]\na: [0, 0]\nkappa: [0, 0]\n"), 3);
  EXPECT_EQ(line_of_error("chart: darboux\ns: [0, 1]\nks: [0, 0]\nky: [0, 0]\nkn: [0, 0]\n"
                          "initial_frame: [[1, 0, 0], [0, 2, 0], [0, 0, 1]]\n"),
            6);
  EXPECT_THROW(load_road("/nonexistent/road.yaml"), ParseError);
}

TEST(RoadFile, IrregularRoadIsNotAParseError) {
  // kappa * half_width > 1 folds the chart inside the lane.
  EXPECT_THROW(parse_road("chart: frenet\nhalf_width: 4\ns: [0, 10]\nkappa: [0.5, 0.5]\n"),
               RegularityError);
}

TEST(ScenarioFile, DefaultsAndOverrides) {
  const Scenario sc = parse_scenario(R"(name: demo
road: roads/flat.yaml
controller: stanley
v_ref: 12
duration: 3.5
planner: false
integrator: rk4
initial: {s: 4, y: 0.5}
vehicle: {m: 1500}
mpc: {w_y: 20, max_iterations: 30}
speed_planner: {margin: 0, lookahead: 25}
stanley: {k: 1.5}
segments:
  - {name: all, s: [0, 50]}
)",
                                     "sc.yaml", "/data");
  EXPECT_EQ(sc.name, "demo");
  EXPECT_EQ(sc.road_file, fs::path("/data/roads/flat.yaml"));
  EXPECT_EQ(sc.controller, ControllerKind::Stanley);
  EXPECT_DOUBLE_EQ(sc.v_ref, 12.0);
  EXPECT_DOUBLE_EQ(sc.initial.v, 12.0);  // defaults to v_ref
  EXPECT_DOUBLE_EQ(sc.initial.pose.y, 0.5);
  EXPECT_DOUBLE_EQ(sc.duration, 3.5);
  EXPECT_FALSE(sc.planner);
  EXPECT_EQ(sc.integrator, Integrator::FixedRk4);
  EXPECT_DOUBLE_EQ(sc.vehicle.m, 1500.0);
  EXPECT_DOUBLE_EQ(sc.vehicle.lf, 1.52);
  EXPECT_DOUBLE_EQ(sc.mpc.w_y, 20.0);
  EXPECT_EQ(sc.mpc.sqp.max_iterations, 30);
  EXPECT_DOUBLE_EQ(sc.speed_planner.margin, 0.0);
  EXPECT_DOUBLE_EQ(sc.stanley.k, 1.5);
  ASSERT_EQ(sc.segments.size(), 1u);
  EXPECT_DOUBLE_EQ(sc.segments[0].s_end, 50.0);

  const Scenario minimal = parse_scenario("road: r.yaml\n");
  EXPECT_EQ(minimal.controller, ControllerKind::NonplanarMpc);
  EXPECT_DOUBLE_EQ(minimal.v_ref, 10.0);
  EXPECT_DOUBLE_EQ(minimal.control_period, 0.05);
  EXPECT_TRUE(minimal.planner);
}

TEST(ScenarioFile, ErrorsCarryLineNumbers) {
  EXPECT_EQ(scenario_error_line("road: r.yaml\ncontroller: pid\n"), 2);
  EXPECT_EQ(scenario_error_line("road: r.yaml\nduration: -1\n"), 2);
  EXPECT_EQ(scenario_error_line("road: r.yaml\n\nplanner: maybe\n"), 3);
  EXPECT_EQ(scenario_error_line("road: r.yaml\ninitial:\n  s: 1\n  psi: 2\n"), 4);
  EXPECT_EQ(scenario_error_line("road: r.yaml\nsegments:\n  - {name: a, s: [5, 1]}\n"), 3);
  EXPECT_EQ(scenario_error_line("name: x\n"), 1);
  EXPECT_EQ(scenario_error_line("road: r.yaml\nintegrator: euler\n"), 2);
  // Cross-field validation has no single line.
  EXPECT_EQ(scenario_error_line("road: r.yaml\nspeed_planner: {f_min: 40000, f_max: 8000}\n"), 0);
}

TEST(ShippedScenarios, AllParseAndLoad) {
  int count = 0;
  for (const auto& entry : fs::directory_iterator(NONPLANAR_SCENARIO_DIR)) {
    if (entry.path().extension() != ".yaml") continue;
    SCOPED_TRACE(entry.path().string());
    const Scenario sc = load_scenario(entry.path());
    const RoadSurface road = load_road(sc.road_file);
    EXPECT_TRUE(road.contains(sc.initial.pose.s, sc.initial.pose.y));
    EXPECT_DOUBLE_EQ(sc.v_ref, 10.0);
    ++count;
  }
  EXPECT_EQ(count, 5);
}

TEST(Controllers, NamesRoundTrip) {
  for (ControllerKind k : {ControllerKind::NonplanarMpc, ControllerKind::PlanarMpc, ControllerKind::Stanley})
    EXPECT_EQ(parse_controller(to_string(k)), k);
  EXPECT_THROW(parse_controller("lqr"), std::invalid_argument);

  const RoadSurface road = parse_road(kFlatRoad);
  Scenario sc;
  for (ControllerKind k : {ControllerKind::NonplanarMpc, ControllerKind::PlanarMpc, ControllerKind::Stanley}) {
    sc.controller = k;
    EXPECT_EQ(make_controller(sc, road)->name(), to_string(k));
  }
}

TEST(Metrics, HandComputedLog) {
  Scenario sc;
  sc.v_ref = 10.0;
  sc.segments = {{"mid", 1.0, 2.0}};
  const std::vector<LogRow> log = {
      row(0.0, 0.0, 0.3, 10.0, 22000.0, 2.0),
      row(0.05, 1.0, -0.4, 12.0, 7000.0, 4.0, "converged+fallback"),
      row(0.1, 2.0, 0.0, 10.0, -5.0, 6.0),
      row(0.15, 3.0, 0.0, 9.0, 41000.0, 0.0),
  };
  const RunMetrics m = compute_metrics(log, sc);
  EXPECT_EQ(m.steps, 4);
  EXPECT_DOUBLE_EQ(m.rms_abs_y, std::sqrt((0.09 + 0.16) / 4.0));
  EXPECT_DOUBLE_EQ(m.max_abs_y, 0.4);
  EXPECT_DOUBLE_EQ(m.rms_speed_error, std::sqrt((4.0 + 1.0) / 4.0));
  EXPECT_DOUBLE_EQ(m.min_normal_force, -5.0);
  EXPECT_DOUBLE_EQ(m.max_normal_force, 41000.0);
  EXPECT_EQ(m.band_violations, 3);
  EXPECT_EQ(m.below_band, 2);
  EXPECT_EQ(m.above_band, 1);
  EXPECT_EQ(m.lost_contact, 1);
  EXPECT_DOUBLE_EQ(m.mean_solve_ms, 3.0);
  EXPECT_DOUBLE_EQ(m.max_solve_ms, 6.0);
  EXPECT_EQ(m.fallbacks, 1);
  ASSERT_EQ(m.segments.size(), 1u);
  EXPECT_EQ(m.segments[0].steps, 2);
  EXPECT_DOUBLE_EQ(m.segments[0].rms_abs_y, std::sqrt(0.16 / 2.0));
  EXPECT_EQ(m.segments[0].band_violations, 2);
  EXPECT_LE(m.band_violations, m.steps);
  EXPECT_LE(m.min_normal_force, m.max_normal_force);

  const RunMetrics empty = compute_metrics({}, sc);
  EXPECT_EQ(empty.steps, 0);
}

TEST(Output, CsvHeaderAndDeterministicTiming) {
  std::vector<LogRow> log = {row(0.0, 1.0, -0.0, 10.0, 22592.43, 3.7, "converged")};
  const std::string csv = trajectory_csv(log, true);
  std::istringstream in(csv);
  std::string header, line;
  std::getline(in, header);
  std::getline(in, line);
  EXPECT_EQ(header, "t,s,y,theta_s,v,beta,a_t,gamma,F_N,x1,x2,x3,v_ref_adj,solve_ms,solver_status");
  EXPECT_EQ(line, "0,1,0,0,10,0,0,0,22592.43,0,0,0,0,0,converged");
  EXPECT_NE(trajectory_csv(log, false).find(",3.7,converged"), std::string::npos);
}

TEST(Output, MetricsJsonAndTable) {
  Scenario sc;
  sc.name = "demo";
  sc.road_file = "/x/roads/flat.yaml";
  RunResult r;
  r.controller = "stanley";
  r.metrics.steps = 7;
  r.metrics.mean_solve_ms = 1.5;
  r.metrics.segments = {{"seg", 3, 0.1, 0.2, 0}};
  RunResult bad = r;
  bad.controller = "planar-mpc";
  bad.completed = false;
  bad.error = "state left the road";
  const nlohmann::json doc = nlohmann::json::parse(metrics_json(sc, {r, bad}));
  EXPECT_EQ(doc["scenario"], "demo");
  EXPECT_EQ(doc["road"], "flat.yaml");
  ASSERT_EQ(doc["runs"].size(), 2u);
  EXPECT_EQ(doc["runs"][0]["steps"], 7);
  EXPECT_EQ(doc["runs"][0]["mean_solve_ms"], 1.5);
  EXPECT_EQ(doc["runs"][0]["segments"][0]["name"], "seg");
  EXPECT_FALSE(doc["runs"][1]["completed"]);
  EXPECT_EQ(doc["runs"][1]["error"], "state left the road");
  EXPECT_EQ(nlohmann::json::parse(metrics_json(sc, {r}, true))["runs"][0]["mean_solve_ms"], 0.0);

  const std::string table = metrics_table({r, bad});
  EXPECT_NE(table.find("stanley"), std::string::npos);
  EXPECT_NE(table.find("diverged"), std::string::npos);
  EXPECT_NE(table.find("[seg]"), std::string::npos);
}

TEST(Output, AtomicWriteReplacesFile) {
  const fs::path dir = temp_dir("atomic");
  const fs::path file = dir / "a.csv";
  write_file_atomic(file, "one\n");
  write_file_atomic(file, "two\n");
  std::ifstream in(file);
  std::string s;
  std::getline(in, s);
  EXPECT_EQ(s, "two");
  EXPECT_EQ(std::distance(fs::directory_iterator(dir), fs::directory_iterator()), 1);
  EXPECT_THROW(write_file_atomic(dir / "missing" / "b.csv", "x"), std::runtime_error);
}

TEST(Run, FlatRoadHasZeroTrackingError) {
  const RoadSurface road = parse_road(kFlatRoad);
  Scenario sc;
  sc.duration = 2.0;
  sc.initial = {10.0, {5.0, 0.0, 0.0}};
  for (ControllerKind k : {ControllerKind::NonplanarMpc, ControllerKind::PlanarMpc, ControllerKind::Stanley}) {
    sc.controller = k;
    int observed = 0;
    const RunResult r = run_scenario(sc, road, [&](const LogRow&) { ++observed; });
    EXPECT_TRUE(r.completed);
    EXPECT_EQ(r.metrics.steps, 41);
    EXPECT_EQ(observed, 41);
    EXPECT_LE(r.metrics.max_abs_y, 1e-9);
    EXPECT_LE(r.metrics.rms_speed_error, 1e-9);
    EXPECT_EQ(r.metrics.band_violations, 0);
  }
}

TEST(Run, DivergenceIsReportedWithPartialLog) {
  const RoadSurface road = parse_road(kFlatRoad);
  Scenario sc;
  sc.controller = ControllerKind::Stanley;
  sc.stanley.k = 1e-3;  // too weak to stop the drift towards the edge
  sc.duration = 5.0;
  sc.initial = {10.0, {5.0, 3.0, 0.5}};
  const RunResult r = run_scenario(sc, road);
  EXPECT_FALSE(r.completed);
  EXPECT_NE(r.error.find("step"), std::string::npos);
  EXPECT_FALSE(r.log.empty());
  EXPECT_LT(r.log.size(), 101u);
  EXPECT_EQ(r.metrics.steps, static_cast<long>(r.log.size()));
}

TEST(Run, OffRoadInitialStateIsDomainError) {
  const RoadSurface road = parse_road(kFlatRoad);
  Scenario sc;
  sc.initial = {10.0, {5.0, 3.6, 0.0}};
  EXPECT_THROW(run_scenario(sc, road), DomainError);
}

TEST(Run, RepeatedRunsAreIdentical) {
  const RoadSurface road = parse_road(R"(chart: tait-bryan
s: [0, 40, 80, 120]
kappa: [0, 0.02, 0.02, 0]
c: [0, -0.3, -0.3, 0]
)");
  Scenario sc;
  sc.duration = 3.0;
  sc.initial = {9.0, {2.0, 0.4, 0.05}};
  const std::string a = trajectory_csv(run_scenario(sc, road).log, true);
  const std::string b = trajectory_csv(run_scenario(sc, road).log, true);
  EXPECT_EQ(a, b);
}
