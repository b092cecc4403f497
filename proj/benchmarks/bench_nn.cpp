#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "dynoid/nn.hpp"

using namespace dynoid;

namespace {

void BM_MlpForward(benchmark::State& state) {
  const int hidden = static_cast<int>(state.range(0));
  const MlpParams params =
      mlp_init({41, hidden, hidden, 1}, Activation::kTanh, 3);
  const Eigen::VectorXd input = Eigen::VectorXd::Random(41);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mlp_forward(params, input));
  }
}
BENCHMARK(BM_MlpForward)->Arg(64)->Arg(256);

void BM_MlpForwardBatch(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  const MlpParams params = mlp_init({41, 256, 256, 1}, Activation::kTanh, 3);
  const Eigen::MatrixXd inputs = Eigen::MatrixXd::Random(41, batch);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mlp_forward_batch(params, inputs));
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_MlpForwardBatch)->Arg(32)->Arg(320);

void BM_MlpGradient(benchmark::State& state) {
  const int hidden = static_cast<int>(state.range(0));
  MlpParams params = mlp_init({41, hidden, hidden, 1}, Activation::kTanh, 3);
  const Eigen::MatrixXd inputs = Eigen::MatrixXd::Random(41, 64);
  const Eigen::MatrixXd targets = Eigen::MatrixXd::Random(1, 64);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mlp_gradient(params, inputs, targets));
  }
}
BENCHMARK(BM_MlpGradient)->Arg(64)->Arg(256);

void BM_AdamStep(benchmark::State& state) {
  MlpParams params = mlp_init({41, 256, 256, 1}, Activation::kTanh, 3);
  AdamState adam = adam_init(params, 1e-4);
  MlpGrads grads = make_zero_grads(params);
  for (auto& w : grads.weights) w.setConstant(1e-3);
  for (auto _ : state) {
    adam_step(params, grads, adam);
    benchmark::DoNotOptimize(params.weights[0](0, 0));
  }
}
BENCHMARK(BM_AdamStep);

}  // namespace
