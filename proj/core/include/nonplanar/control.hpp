#pragma once

// Path-tracking controllers: multiple-shooting MPC on the nonplanar or planar
// kinematic model, the normal-force speed planner, and a Stanley baseline.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nonplanar/nlp.hpp"
#include "nonplanar/surfaces.hpp"
#include "nonplanar/vehicle.hpp"

namespace nonplanar {

enum class PredictionModel { Nonplanar, Planar };

struct MpcConfig {
  int horizon = 20;
  double step = 0.05;
  double w_y = 10.0;
  double w_theta = 5.0;
  double w_v = 1.0;
  double w_da = 0.5;
  double w_dgamma = 50.0;
  double v_ref = 10.0;
  PredictionModel model = PredictionModel::Nonplanar;
  /// Adds g (e3 . e1) to the commanded traction (planar baseline only).
  bool gravity_feed_forward = false;
  SqpOptions sqp;

  void validate() const;
  int state_offset(int k) const { return 6 * k; }
  int input_offset(int k) const { return 6 * k + 4; }
  int dimension() const { return 6 * horizon + 4; }
};

struct SpeedPlannerConfig {
  double lookahead = 30.0;
  double f_min = 8000.0;
  double f_max = 40000.0;
  /// The planner aims inside [f_min + margin, f_max - margin] to absorb tracking lag.
  double margin = 500.0;
  double rate_weight = 4.0;
  int samples = 61;
  double v_max = 40.0;

  void validate() const;
};

struct PlannedSpeed {
  double v = 0.0;
  double lo = 0.0;  // admissible speed interval over the lookahead
  double hi = 0.0;
  bool infeasible_band = false;
};

/// Speed closest to `v_desired` (with a rate penalty towards `v_previous`)
/// that keeps the normal force in band over the lookahead window.
PlannedSpeed plan_speed(const RoadSurface& road, const VehicleState& state, double v_desired,
                        const SpeedPlannerConfig& config, double v_previous,
                        const VehicleParams& params = {});

/// Shifts a multiple-shooting solution by one stage and repeats the last stage.
VectorXd warm_shift(const VectorXd& previous, int horizon);

struct MpcDiagnostics {
  SolveStatus status = SolveStatus::Converged;
  bool fallback = false;
  bool infeasible_band = false;
  int iterations = 0;
  double kkt = 0.0;
  double solve_ms = 0.0;
  double v_ref_adj = 0.0;
  std::vector<Vec4<double>> predicted;
};

class Controller {
 public:
  virtual ~Controller() = default;
  virtual ControlDecision decide(const VehicleState& x, double t) = 0;
  virtual std::string name() const = 0;
};

class MpcController : public Controller {
 public:
  MpcController(const RoadSurface& road, VehicleParams params, MpcConfig config,
                std::optional<SpeedPlannerConfig> planner = std::nullopt);

  /// One receding-horizon step: plan speed, solve, return the first input.
  ControlInput step(const VehicleState& x, MpcDiagnostics* diag = nullptr);

  ControlDecision decide(const VehicleState& x, double t) override;
  std::string name() const override;

  void reset();
  void set_warm_start(bool enabled) { use_warm_start_ = enabled; }
  const MpcConfig& config() const { return config_; }
  const VectorXd& last_solution() const { return solution_; }

 private:
  NlpProblem build_problem(const VehicleState& x, double v_ref) const;
  VectorXd cold_start(const VehicleState& x) const;
  double feed_forward(const VehicleState& x) const;

  const RoadSurface* road_;
  VehicleParams params_;
  MpcConfig config_;
  std::optional<SpeedPlannerConfig> planner_;
  bool use_warm_start_ = true;
  VectorXd solution_;
  ControlInput prev_model_input_;
  std::optional<double> prev_v_ref_;
};

struct StanleyConfig {
  double k = 2.5;
  double softening = 0.1;
  double speed_gain = 2.0;
  double v_ref = 10.0;

  void validate() const;
};

class StanleyController : public Controller {
 public:
  StanleyController(const RoadSurface& road, VehicleParams params, StanleyConfig config);

  ControlInput step(const VehicleState& x) const;
  ControlDecision decide(const VehicleState& x, double t) override;
  std::string name() const override { return "stanley"; }

 private:
  const RoadSurface* road_;
  VehicleParams params_;
  StanleyConfig config_;
};

/// g (e3 . e1): traction that cancels the along-track gravity at heading theta.
double gravity_feed_forward(const RoadSurface& road, const VehicleState& x, double g);

}  // namespace nonplanar
