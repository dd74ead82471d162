#include <benchmark/benchmark.h>

#include "magmpc/harness.hpp"
#include "magmpc/nmpc.hpp"
#include "magmpc/orbitfield.hpp"
#include "magmpc/pwm.hpp"
#include "magmpc/quatdyn.hpp"

namespace {

using namespace magmpc;

FieldFunction orbit_field() {
  const OrbitalElements el = sso_elements();
  return [el](double t) { return field_at_time(el, DipoleConstants{}, t); };
}

void BM_Rk4Step(benchmark::State& state) {
  const InertiaTensor inertia(0.020, 0.030, 0.040);
  AttitudeState x{Vec4(0.2, -0.1, 0.4, 0.8).normalized(), Vec3(0.07, 0.05, -0.05)};
  const Vec3 m(0.05, -0.03, 0.08);
  const Vec3 b(2e-5, -3e-5, 1e-5);
  for (auto _ : state) {
    x = rk4_step(x, m, b, inertia, 0.0, 0.1);
    benchmark::DoNotOptimize(x);
  }
}
BENCHMARK(BM_Rk4Step);

void BM_FieldAtTime(benchmark::State& state) {
  const OrbitalElements el = sso_elements();
  double t = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(field_at_time(el, DipoleConstants{}, t));
    t += 2.0;
  }
}
BENCHMARK(BM_FieldAtTime);

void BM_Quantize(benchmark::State& state) {
  double u = -0.15;
  for (auto _ : state) {
    benchmark::DoNotOptimize(pwm::quantize(u, 0.1));
    u = u > 0.15 ? -0.15 : u + 1e-4;
  }
}
BENCHMARK(BM_Quantize);

void BM_CostAndGradient(benchmark::State& state) {
  nmpc::MpcConfig cfg = presets::scenario(presets::kDetumblePaper).mpc;
  cfg.horizon = static_cast<int>(state.range(0));
  const AttitudeState x0{Vec4(0, 0, 0, 1), Vec3(0.07, 0.05, -0.05)};
  const nmpc::HorizonProblem problem(x0, 0.0, orbit_field(), cfg);
  const Eigen::VectorXd u = Eigen::VectorXd::Constant(problem.dimension(), 0.02);
  Eigen::VectorXd g;
  for (auto _ : state) benchmark::DoNotOptimize(problem.cost_and_gradient(u, g));
}
BENCHMARK(BM_CostAndGradient)->Arg(1)->Arg(10);

void BM_Solve(benchmark::State& state) {
  const ScenarioConfig sc = presets::scenario(
      state.range(0) == 0 ? presets::kDetumblePaper : presets::kAttitudePaper);
  const FieldFunction field = orbit_field();
  for (auto _ : state) {
    benchmark::DoNotOptimize(nmpc::solve(sc.x0, 0.0, field, sc.mpc));
  }
}
BENCHMARK(BM_Solve)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
