#include <filesystem>
#include <random>

#include <benchmark/benchmark.h>

#include "nonplanar/control.hpp"
#include "nonplanar/dual.hpp"
#include "nonplanar/nlp.hpp"
#include "nonplanar/scenario.hpp"

using namespace nonplanar;

namespace {

const std::filesystem::path kScenarios = NONPLANAR_SCENARIO_DIR;

const RoadSurface& road(const char* name) {
  static const RoadSurface banked = load_road(kScenarios / "roads" / "banked_turn.yaml");
  static const RoadSurface loop = load_road(kScenarios / "roads" / "vertical_loop.yaml");
  return std::string(name) == "loop" ? loop : banked;
}

void BM_SurfaceJet(benchmark::State& state) {
  const RoadSurface& r = road("banked");
  double s = 60.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(r.evaluate_jet(s, 1.0));
    s = s < 130.0 ? s + 0.37 : 60.0;
  }
}
BENCHMARK(BM_SurfaceJet);

void BM_Rates(benchmark::State& state) {
  const RoadSurface& r = road("loop");
  const VehicleParams p;
  const Vec4<double> z(10.0, 80.0, 0.5, 0.1);
  const Vec2<double> u(1.0, 0.05);
  for (auto _ : state) benchmark::DoNotOptimize(nonplanar_rates<double>(r, z, u, p));
}
BENCHMARK(BM_Rates);

void BM_RatesJacobian(benchmark::State& state) {
  const RoadSurface& r = road("loop");
  const VehicleParams p;
  Eigen::Matrix<double, 6, 1> x;
  x << 10.0, 80.0, 0.5, 0.1, 1.0, 0.05;
  const auto f = [&](const auto& w) {
    using T = typename std::decay_t<decltype(w)>::Scalar;
    return nonplanar_rates<T>(r, Vec4<T>(w.template head<4>()), Vec2<T>(w.template tail<2>()), p);
  };
  for (auto _ : state) benchmark::DoNotOptimize(dual_jacobian<6>(f, x));
}
BENCHMARK(BM_RatesJacobian);

// Dense QP shaped like one SQP subproblem of the horizon-N MPC.
void BM_Qp(benchmark::State& state) {
  const int N = static_cast<int>(state.range(0));
  const int n = 6 * N + 4, m = 4 * (N + 1);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  QpProblem qp;
  const MatrixXd L = MatrixXd::NullaryExpr(n, n, [&] { return U(rng); });
  qp.H = L * L.transpose() / n + MatrixXd::Identity(n, n);
  qp.g = VectorXd::NullaryExpr(n, [&] { return U(rng); });
  qp.A = MatrixXd::Zero(m, n);
  for (int k = 0; k <= N; ++k)
    for (int i = 0; i < 4; ++i) {
      qp.A(4 * k + i, 6 * k + i) = 1.0;
      if (k < N) qp.A(4 * (k + 1) + i, 6 * k + i) = -1.0;
    }
  qp.b = VectorXd::NullaryExpr(m, [&] { return 0.1 * U(rng); });
  qp.lower = VectorXd::Constant(n, -0.5);
  qp.upper = VectorXd::Constant(n, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(solve_qp(qp));
}
BENCHMARK(BM_Qp)->Arg(5)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_MpcStep(benchmark::State& state) {
  const RoadSurface& r = road("banked");
  MpcConfig cfg;
  cfg.model = state.range(0) ? PredictionModel::Nonplanar : PredictionModel::Planar;
  MpcController mpc(r, {}, cfg);
  const VehicleState x{10.0, {80.0, 0.3, 0.05}};
  for (auto _ : state) {
    mpc.reset();
    benchmark::DoNotOptimize(mpc.step(x));
  }
  state.SetLabel(mpc.name());
}
BENCHMARK(BM_MpcStep)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
