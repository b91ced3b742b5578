// nonplanar_sim: run closed-loop scenarios and compare controllers.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "nonplanar/scenario.hpp"

namespace fs = std::filesystem;
using namespace nonplanar;

namespace {

constexpr int kExitDiverged = 1;
constexpr int kExitInput = 2;

struct Overrides {
  std::string scenario_file;
  std::string out_dir = "out";
  std::string road_file;
  double duration = 0.0;
  double v_ref = 0.0;
  bool no_planner = false;
  bool deterministic = false;
  bool duration_set = false;
  bool v_ref_set = false;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_st("nonplanar");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("NONPLANAR_LOG")) {
    const spdlog::level::level_enum lvl = spdlog::level::from_str(env);
    // from_str maps unknown names to "off"; only accept it when asked for.
    if (lvl != spdlog::level::off || std::string(env) == "off") spdlog::set_level(lvl);
    else spdlog::warn("NONPLANAR_LOG='{}' is not a level; using warn", env);
  }
}

Scenario load(const Overrides& o) {
  Scenario sc = load_scenario(o.scenario_file);
  if (!o.road_file.empty()) sc.road_file = o.road_file;
  if (o.duration_set) sc.duration = o.duration;
  if (o.v_ref_set) {
    sc.v_ref = o.v_ref;
    sc.initial.v = o.v_ref;
  }
  if (o.no_planner) sc.planner = false;
  sc.validate();
  return sc;
}

RunResult run_one(const Scenario& sc, const RoadSurface& road) {
  spdlog::info("running {} with {} for {} s", sc.name, to_string(sc.controller), sc.duration);
  const RowObserver observer = [](const LogRow& r) {
    spdlog::debug("t={:.2f} s={:.3f} y={:+.4f} v={:.3f} F_N={:.0f} solve={:.2f}ms {}", r.t,
                  r.state.pose.s, r.state.pose.y, r.state.v, r.normal_force, r.solve_ms, r.status);
  };
  RunResult r = run_scenario(sc, road, observer);
  if (!r.completed) spdlog::error("{}: {}", r.controller, r.error);
  return r;
}

fs::path output_path(const Overrides& o, const Scenario& sc, const std::string& suffix) {
  return fs::path(o.out_dir) / (sc.name + "-" + suffix);
}

int do_run(const Overrides& o, const std::string& controller) {
  Scenario sc = load(o);
  if (!controller.empty()) sc.controller = parse_controller(controller);
  const RoadSurface road = load_road(sc.road_file);
  const RunResult r = run_one(sc, road);

  fs::create_directories(o.out_dir);
  write_file_atomic(output_path(o, sc, r.controller + ".csv"), trajectory_csv(r.log, o.deterministic));
  write_file_atomic(output_path(o, sc, r.controller + ".metrics.json"),
                    metrics_json(sc, {r}, o.deterministic));
  std::cout << metrics_table({r});
  return r.completed ? 0 : kExitDiverged;
}

std::vector<std::string> split(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream ss(list);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

int do_compare(const Overrides& o, const std::string& list) {
  const std::vector<std::string> names = split(list);
  if (names.size() < 2) throw CLI::ValidationError("--controllers", "compare needs at least two controllers");
  std::vector<ControllerKind> kinds;
  for (const std::string& n : names) kinds.push_back(parse_controller(n));

  const Scenario base = load(o);
  const RoadSurface road = load_road(base.road_file);
  fs::create_directories(o.out_dir);
  std::vector<RunResult> runs;
  bool ok = true;
  for (ControllerKind k : kinds) {
    Scenario sc = base;
    sc.controller = k;
    RunResult r;
    try {
      r = run_one(sc, road);
    } catch (const std::exception& e) {
      r.controller = to_string(k);
      r.completed = false;
      r.error = e.what();
      spdlog::error("{}: {}", r.controller, r.error);
    }
    ok = ok && r.completed;
    write_file_atomic(output_path(o, sc, r.controller + ".csv"), trajectory_csv(r.log, o.deterministic));
    runs.push_back(std::move(r));
  }
  write_file_atomic(output_path(o, base, "compare.metrics.json"), metrics_json(base, runs, o.deterministic));
  std::cout << metrics_table(runs);
  return ok ? 0 : kExitDiverged;
}

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("scenario", o.scenario_file, "Scenario file (YAML)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out_dir, "Output directory")->capture_default_str();
  cmd->add_option("--seed-road", o.road_file, "Road file replacing the scenario's road")
      ->check(CLI::ExistingFile);
  cmd->add_option("--duration", o.duration, "Simulated time (s)")
      ->check(CLI::PositiveNumber)
      ->each([&o](const std::string&) { o.duration_set = true; });
  cmd->add_option("--v-ref", o.v_ref, "Desired speed (m/s)")
      ->check(CLI::NonNegativeNumber)
      ->each([&o](const std::string&) { o.v_ref_set = true; });
  cmd->add_flag("--no-planner", o.no_planner, "Disable the normal-force speed planner");
  cmd->add_flag("--deterministic", o.deterministic, "Write solve_ms as 0 so outputs are byte-stable");
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Nonplanar vehicle path-tracking simulator"};
  app.require_subcommand(1);

  Overrides run_opts;
  std::string controller;
  CLI::App* run = app.add_subcommand("run", "Run one scenario");
  add_common(run, run_opts);
  run->add_option("--controller", controller, "nonplanar-mpc | planar-mpc | stanley");

  Overrides cmp_opts;
  std::string controllers;
  CLI::App* cmp = app.add_subcommand("compare", "Run several controllers on one scenario");
  add_common(cmp, cmp_opts);
  cmp->add_option("--controllers", controllers, "Comma-separated controller list")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (run->parsed()) return do_run(run_opts, controller);
    return do_compare(cmp_opts, controllers);
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitInput;
  } catch (const DomainError& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
}
