#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace dynoid {

enum class Activation { kTanh, kRelu, kIdentity };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation act);

/// Dense feed-forward network. Hidden layers share one activation; the
/// output layer is always affine. weights[l] maps layer l to layer l+1
/// and has shape layer_dims[l+1] x layer_dims[l].
struct MlpParams {
  std::vector<int> layer_dims;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  Activation activation = Activation::kTanh;

  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }
  int layer_count() const { return static_cast<int>(weights.size()); }
  std::size_t parameter_count() const;
};

/// Weights uniform on (-sqrt(6/fan_in), +sqrt(6/fan_in)), biases zero.
/// Deterministic for a fixed seed.
MlpParams mlp_init(const std::vector<int>& layer_dims, Activation activation,
                   std::uint64_t seed);

/// Single-vector forward pass.
Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& x);

/// Column-batched forward pass: x is input_dim x batch.
Eigen::MatrixXd mlp_forward_batch(const MlpParams& params,
                                  const Eigen::MatrixXd& x);

/// Post-activation values per layer, kept for the backward pass.
/// activations[0] is the input batch, activations.back() the output.
struct MlpCache {
  std::vector<Eigen::MatrixXd> activations;
};

Eigen::MatrixXd mlp_forward_cached(const MlpParams& params,
                                   const Eigen::MatrixXd& x, MlpCache& cache);

/// Parameter gradients, same shapes as the owning MlpParams.
struct MlpGrads {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  void set_zero();
  double squared_norm() const;
  void add_scaled(const MlpGrads& other, double scale);
};

MlpGrads make_zero_grads(const MlpParams& params);

/// Reverse pass for an arbitrary scalar loss: grad_output holds
/// d(loss)/d(network output) per batch column. Parameter gradients are
/// accumulated into grads; the return value is d(loss)/d(input).
Eigen::MatrixXd mlp_backward(const MlpParams& params, const MlpCache& cache,
                             const Eigen::MatrixXd& grad_output,
                             MlpGrads& grads);

/// MSE over the batch: mean over batch columns and output components.
double mse_loss(const Eigen::MatrixXd& outputs, const Eigen::MatrixXd& targets);

/// Exact analytic gradient of mse_loss(forward(inputs), targets) with
/// respect to every weight and bias.
MlpGrads mlp_gradient(const MlpParams& params, const Eigen::MatrixXd& inputs,
                      const Eigen::MatrixXd& targets);

/// Scales grads so their global l2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_gradient_norm(MlpGrads& grads, double max_norm);

struct AdamState {
  std::int64_t step_count = 0;
  MlpGrads first_moment;
  MlpGrads second_moment;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

AdamState adam_init(const MlpParams& params, double lr = 1e-4);

/// Standard Adam update with bias correction; increments step_count.
void adam_step(MlpParams& params, const MlpGrads& grads, AdamState& state);

/// Shared knobs for the two training loops (regressor and autoencoder).
struct TrainConfig {
  int epochs = 2000;
  double lr = 1e-4;
  int batch_size = 10;          // trajectories (regressor) or samples x32 (autoencoder)
  int chunk_len = 100;          // truncation length for backprop through rollouts
  std::vector<int> hidden_dims = {64, 64};
  Activation activation = Activation::kTanh;
  double grad_clip = 10.0;
  int valid_every = 10;         // epochs between validation evaluations
  double valid_fraction = 0.1;  // autoencoder: share of samples held out
  bool joint_reconstruction = false;  // autoencoder: add prediction error term
  bool verbose = false;
};

}  // namespace dynoid
