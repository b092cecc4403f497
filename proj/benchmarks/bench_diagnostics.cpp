#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "dynoid/diagnostics.hpp"
#include "dynoid/systems.hpp"

using namespace dynoid;

namespace {

Box tank_state_box() {
  Box box;
  box.lo = Eigen::Vector2d(0.1, 0.1);
  box.hi = Eigen::Vector2d(5.0, 5.0);
  return box;
}

Box tank_input_box() {
  Box box;
  box.lo = Eigen::VectorXd::Zero(1);
  box.hi = Eigen::VectorXd::Constant(1, 5.0);
  return box;
}

void BM_EstimateLipschitz(benchmark::State& state) {
  const TankPlant tank;
  const int samples = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        estimate_lipschitz(tank, tank_state_box(), tank_input_box(), samples, 7));
  }
  state.SetItemsProcessed(state.iterations() * samples);
}
BENCHMARK(BM_EstimateLipschitz)->Arg(10000)->Arg(100000);

void BM_EstimateAlpha(benchmark::State& state) {
  const TankPlant tank;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        estimate_alpha(tank, 5, tank_state_box(), tank_input_box(), 10000, 7));
  }
}
BENCHMARK(BM_EstimateAlpha);

void BM_InvertState(benchmark::State& state) {
  const TankPlant tank;
  const Box sbox = tank_state_box();
  const int ell = 5;
  const Eigen::VectorXd x_true = (Eigen::VectorXd(2) << 1.3, 2.1).finished();
  const Eigen::MatrixXd inputs = Eigen::MatrixXd::Constant(ell, 1, 1.5);
  const Eigen::VectorXd measured = observability_map(tank, x_true, inputs);
  InvertOptions options;
  options.grid_points = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        invert_state(tank, ell, measured, inputs, sbox, options));
  }
}
BENCHMARK(BM_InvertState)->Arg(41)->Arg(201);

}  // namespace
