#pragma once

// Road and scenario files, closed-loop runs, trajectory CSV and run metrics.

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nonplanar/control.hpp"
#include "nonplanar/surfaces.hpp"
#include "nonplanar/vehicle.hpp"

namespace nonplanar {

enum class ControllerKind { NonplanarMpc, PlanarMpc, Stanley };

std::string to_string(ControllerKind k);
/// "nonplanar-mpc", "planar-mpc" or "stanley"; throws std::invalid_argument otherwise.
ControllerKind parse_controller(const std::string& name);

/// Named station range used for per-segment metrics.
struct Segment {
  std::string name;
  double s_begin = 0.0;
  double s_end = 0.0;
};

struct Scenario {
  std::string name;
  std::filesystem::path road_file;
  ControllerKind controller = ControllerKind::NonplanarMpc;
  VehicleParams vehicle;
  VehicleState initial{10.0, {0.0, 0.0, 0.0}};
  double v_ref = 10.0;
  double duration = 10.0;
  double control_period = 0.05;
  bool planner = true;  // nonplanar MPC only
  MpcConfig mpc;
  SpeedPlannerConfig speed_planner;
  StanleyConfig stanley;
  Integrator integrator = Integrator::AdaptiveRk45;
  std::vector<Segment> segments;

  void validate() const;
};

/// Throws ParseError (with line numbers) on malformed input.
RoadSurface parse_road(const std::string& text, const std::string& source = "<road>");
RoadSurface load_road(const std::filesystem::path& file);

/// Relative road paths resolve against `base_dir`.
Scenario parse_scenario(const std::string& text, const std::string& source = "<scenario>",
                        const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& file);

std::unique_ptr<Controller> make_controller(const Scenario& scenario, const RoadSurface& road);

struct SegmentMetrics {
  std::string name;
  long steps = 0;
  double rms_abs_y = 0.0;
  double max_abs_y = 0.0;
  long band_violations = 0;
};

struct RunMetrics {
  long steps = 0;
  double rms_abs_y = 0.0;
  double max_abs_y = 0.0;
  double rms_speed_error = 0.0;  // against the desired v_ref
  double min_normal_force = 0.0;
  double max_normal_force = 0.0;
  long band_violations = 0;
  long below_band = 0;
  long above_band = 0;
  long lost_contact = 0;  // F_N <= 0
  double mean_solve_ms = 0.0;
  double max_solve_ms = 0.0;
  long fallbacks = 0;
  std::vector<SegmentMetrics> segments;
};

inline constexpr double kBandMin = 8000.0;
inline constexpr double kBandMax = 40000.0;

RunMetrics compute_metrics(const std::vector<LogRow>& log, const Scenario& scenario,
                           double f_min = kBandMin, double f_max = kBandMax);

struct RunResult {
  std::string controller;
  std::vector<LogRow> log;
  RunMetrics metrics;
  bool completed = true;
  std::string error;  // set when the run diverged or could not start
};

/// Observer called with every logged row (progress logging).
using RowObserver = std::function<void(const LogRow&)>;

/// Runs the scenario. A diverged simulation is reported in the result, not thrown.
RunResult run_scenario(const Scenario& scenario, const RoadSurface& road,
                       const RowObserver& observer = {});

inline constexpr const char* kCsvHeader =
    "t,s,y,theta_s,v,beta,a_t,gamma,F_N,x1,x2,x3,v_ref_adj,solve_ms,solver_status";

/// Trajectory CSV; `deterministic` writes solve_ms as 0 so output is byte-stable.
std::string trajectory_csv(const std::vector<LogRow>& log, bool deterministic = false);

/// Machine-readable metrics document (JSON).
std::string metrics_json(const Scenario& scenario, const std::vector<RunResult>& runs,
                         bool deterministic = false);

/// Human-readable side-by-side table.
std::string metrics_table(const std::vector<RunResult>& runs);

/// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& file, const std::string& contents);

}  // namespace nonplanar
