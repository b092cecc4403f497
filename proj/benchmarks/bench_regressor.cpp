#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "dynoid/datagen.hpp"
#include "dynoid/regressor.hpp"

using namespace dynoid;

namespace {

Dataset bench_dataset() {
  TankDatasetConfig cfg;
  cfg.n_train = 4;
  cfg.n_valid = 1;
  cfg.n_test = 1;
  return generate_tank_dataset(cfg, 5);
}

void BM_ShiftUpdate(benchmark::State& state) {
  const StateMapSpec spec{static_cast<int>(state.range(0)), 1, 1};
  Eigen::VectorXd z = Eigen::VectorXd::Random(spec.state_dim());
  const Eigen::VectorXd u = Eigen::VectorXd::Random(1);
  const Eigen::VectorXd y = Eigen::VectorXd::Random(1);
  for (auto _ : state) {
    z = shift_update(spec, z, u, y);
    benchmark::DoNotOptimize(z);
  }
}
BENCHMARK(BM_ShiftUpdate)->Arg(5)->Arg(30);

void BM_MatrixUpdate(benchmark::State& state) {
  const StateMapSpec spec{static_cast<int>(state.range(0)), 1, 1};
  const CanonicalMatrices m = canonical_matrices(spec);
  Eigen::VectorXd z = Eigen::VectorXd::Random(spec.state_dim());
  const Eigen::VectorXd u = Eigen::VectorXd::Random(1);
  const Eigen::VectorXd y = Eigen::VectorXd::Random(1);
  for (auto _ : state) {
    z = m.Abar * z + m.Bbar * u + m.Sbar * y;
    benchmark::DoNotOptimize(z);
  }
}
BENCHMARK(BM_MatrixUpdate)->Arg(5)->Arg(30);

void BM_RegressionLoss(benchmark::State& state) {
  const Dataset ds = bench_dataset();
  RegressorModel model;
  model.spec = {10, 1, 1};
  model.normalization = ds.normalization;
  model.h = mlp_init({model.spec.state_dim() + 1, 64, 64, 1},
                     Activation::kTanh, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(regression_loss(model, ds.train[0]));
  }
}
BENCHMARK(BM_RegressionLoss);

void BM_RegressionGradient(benchmark::State& state) {
  const Dataset ds = bench_dataset();
  RegressorModel model;
  model.spec = {10, 1, 1};
  model.normalization = ds.normalization;
  model.h = mlp_init({model.spec.state_dim() + 1, 64, 64, 1},
                     Activation::kTanh, 3);
  MlpGrads grads = make_zero_grads(model.h);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        regression_loss_gradient(model, ds.train[0], grads, 100));
  }
}
BENCHMARK(BM_RegressionGradient);

void BM_Rollout(benchmark::State& state) {
  const Dataset ds = bench_dataset();
  RegressorModel model;
  model.spec = {10, 1, 1};
  model.normalization = ds.normalization;
  model.h = mlp_init({model.spec.state_dim() + 1, 64, 64, 1},
                     Activation::kTanh, 3);
  const Trajectory& tr = ds.test[0];
  const Eigen::MatrixXd init_u = tr.inputs.topRows(10);
  const Eigen::MatrixXd init_y = tr.outputs.topRows(10);
  const Eigen::MatrixXd inputs = tr.inputs.middleRows(10, 100);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rollout(model, init_u, init_y, inputs));
  }
}
BENCHMARK(BM_Rollout);

}  // namespace
