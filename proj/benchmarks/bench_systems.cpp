#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "dynoid/datagen.hpp"
#include "dynoid/systems.hpp"

using namespace dynoid;

namespace {

void BM_TankStep(benchmark::State& state) {
  const TankParams p;
  Eigen::Vector2d x(1.0, 1.0);
  for (auto _ : state) {
    x = tank_step(x, 2.0, p);
    benchmark::DoNotOptimize(x);
  }
}
BENCHMARK(BM_TankStep);

void BM_DroneStep(benchmark::State& state) {
  const DroneParams p;
  const double hover = drone_hover_speed(p);
  DroneState x = DroneState::Zero();
  const Eigen::Vector2d u(hover, hover + 1.0);
  for (auto _ : state) {
    x = drone_step(x, u, p);
    benchmark::DoNotOptimize(x);
  }
}
BENCHMARK(BM_DroneStep);

void BM_LqTracker(benchmark::State& state) {
  const DroneParams p;
  const LqTrackerConfig cfg;
  const DroneState x = DroneState::Zero();
  Eigen::Matrix<double, 6, Eigen::Dynamic> reference(6, cfg.horizon);
  reference.setZero();
  reference.row(0).setLinSpaced(cfg.horizon, 0.0, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(lq_tracker(reference, x, p, cfg));
  }
}
BENCHMARK(BM_LqTracker);

void BM_TankTrajectory(benchmark::State& state) {
  TankDatasetConfig cfg;
  cfg.n_train = 1;
  cfg.n_valid = 1;
  cfg.n_test = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate_tank_dataset(cfg, 5));
  }
}
BENCHMARK(BM_TankTrajectory);

}  // namespace
