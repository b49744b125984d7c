#include <memory>
#include <random>

#include <benchmark/benchmark.h>

#include "meltpool/dynamics.hpp"
#include "meltpool/gp.hpp"
#include "meltpool/mpc.hpp"
#include "meltpool/thermal.hpp"

using namespace meltpool;

namespace {

// Synthetic one-step model with the shape of the real one: area responds to
// power and residual heat, 100 training points.
std::shared_ptr<const DynModel> synthetic_model() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> up(150.0, 350.0), ut(353.0, 900.0), ux(0.0, 0.004);
  std::vector<DynSample> s;
  for (int i = 0; i < 100; ++i) {
    DynSample d;
    d.area = ux(rng);
    d.temp = ut(rng);
    d.power = up(rng);
    d.speed = 800.0 + 10.0 * (i % 3);
    d.next_area = 1.1e-5 * d.power + 2e-6 * (d.temp - 353.0) + 0.2 * d.area;
    s.push_back(d);
  }
  DynTrainConfig cfg;
  cfg.optimizer.restarts = 1;
  cfg.optimizer.max_iterations = 50;
  return std::make_shared<const DynModel>(train_dynamics(s, cfg));
}

const std::shared_ptr<const DynModel>& model() {
  static const auto m = synthetic_model();
  return m;
}

void BM_ControlStep(benchmark::State& state) {
  MpcConfig cfg;
  cfg.horizon = static_cast<int>(state.range(0));
  double p = 250.0;
  int k = 0;
  for (auto _ : state) {
    const double t = (k++ % 50) < 5 ? 700.0 : 400.0;
    const auto out = control_step(*model(), 0.0028, t, 400.0, p, 800.0, cfg);
    p = out.power;
    benchmark::DoNotOptimize(out);
  }
}
BENCHMARK(BM_ControlStep)->Arg(5)->Arg(20)->Unit(benchmark::kMicrosecond);

void BM_GpPredict(benchmark::State& state) {
  const Eigen::Vector4d x = model()->normalizer().normalize_input(Eigen::Vector4d(0.003, 500.0, 250.0, 800.0));
  for (auto _ : state) benchmark::DoNotOptimize(model()->gp().predict(x));
}
BENCHMARK(BM_GpPredict);

void BM_Linearize(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(model()->linearize(0.003, 500.0, 250.0, 800.0));
}
BENCHMARK(BM_Linearize);

void BM_ThermalStep(benchmark::State& state) {
  SimConfig sim;
  sim.cell_size_um = static_cast<double>(state.range(0));
  ScanPlan plan;
  plan.tracks = {{0.0, 0.0, 2.0, 0.0}};
  plan.power = Waveform::constant(250.0, 0.0, 350.0);
  plan.speed = Waveform::constant(800.0, 400.0, 1200.0);
  ThermalField field = ThermalField::fit_to_plan(plan, sim, 353.0);
  ThermalStepper stepper({}, {}, sim);
  for (auto _ : state) {
    BeamState beam;
    beam.x_mm = 1.0;
    beam.power_w = 250.0;
    stepper.step(field, beam, 50e-6);
  }
  state.counters["cells"] = static_cast<double>(field.cell_count());
}
BENCHMARK(BM_ThermalStep)->Arg(40)->Arg(20)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
