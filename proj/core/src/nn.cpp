#include "dynoid/nn.hpp"

#include <cmath>
#include <random>

#include "dynoid/errors.hpp"

namespace dynoid {

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  if (name == "identity") return Activation::kIdentity;
  throw UsageError("unknown activation '" + name +
                   "' (expected tanh, relu, or identity)");
}

std::string to_string(Activation act) {
  switch (act) {
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    case Activation::kIdentity: return "identity";
  }
  throw UsageError("invalid activation enum value");
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    n += static_cast<std::size_t>(weights[l].size()) +
         static_cast<std::size_t>(biases[l].size());
  }
  return n;
}

MlpParams mlp_init(const std::vector<int>& layer_dims, Activation activation,
                   std::uint64_t seed) {
  if (layer_dims.size() < 2) {
    throw UsageError("mlp_init: need at least an input and an output layer");
  }
  for (int d : layer_dims) {
    if (d < 1) throw UsageError("mlp_init: layer dims must be >= 1");
  }
  MlpParams params;
  params.layer_dims = layer_dims;
  params.activation = activation;
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const int fan_in = layer_dims[l];
    const int fan_out = layer_dims[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Eigen::MatrixXd w(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) w(r, c) = dist(rng);
    }
    params.weights.push_back(std::move(w));
    params.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return params;
}

namespace {

inline void apply_activation(Eigen::MatrixXd& a, Activation act) {
  switch (act) {
    case Activation::kTanh:
      a = a.array().tanh();
      break;
    case Activation::kRelu:
      a = a.cwiseMax(0.0);
      break;
    case Activation::kIdentity:
      break;
  }
}

// d(act)/d(pre-activation) expressed through the post-activation value.
inline Eigen::ArrayXXd activation_derivative(const Eigen::MatrixXd& post,
                                             Activation act) {
  switch (act) {
    case Activation::kTanh:
      return 1.0 - post.array().square();
    case Activation::kRelu:
      return (post.array() > 0.0).cast<double>();
    case Activation::kIdentity:
      return Eigen::ArrayXXd::Ones(post.rows(), post.cols());
  }
  throw UsageError("invalid activation enum value");
}

}  // namespace

Eigen::MatrixXd mlp_forward_batch(const MlpParams& params,
                                  const Eigen::MatrixXd& x) {
  if (x.rows() != params.input_dim()) {
    throw UsageError("mlp_forward: input has " + std::to_string(x.rows()) +
                     " rows, expected " + std::to_string(params.input_dim()));
  }
  Eigen::MatrixXd a = x;
  const int n_layers = params.layer_count();
  for (int l = 0; l < n_layers; ++l) {
    a = (params.weights[l] * a).colwise() + params.biases[l];
    if (l + 1 < n_layers) apply_activation(a, params.activation);
  }
  if (!a.allFinite()) throw NumericError("mlp_forward: non-finite output");
  return a;
}

Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& x) {
  return mlp_forward_batch(params, x);
}

Eigen::MatrixXd mlp_forward_cached(const MlpParams& params,
                                   const Eigen::MatrixXd& x, MlpCache& cache) {
  if (x.rows() != params.input_dim()) {
    throw UsageError("mlp_forward_cached: input has " +
                     std::to_string(x.rows()) + " rows, expected " +
                     std::to_string(params.input_dim()));
  }
  const int n_layers = params.layer_count();
  cache.activations.resize(n_layers + 1);
  cache.activations[0] = x;
  for (int l = 0; l < n_layers; ++l) {
    Eigen::MatrixXd a =
        (params.weights[l] * cache.activations[l]).colwise() + params.biases[l];
    if (l + 1 < n_layers) apply_activation(a, params.activation);
    cache.activations[l + 1] = std::move(a);
  }
  return cache.activations.back();
}

void MlpGrads::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

double MlpGrads::squared_norm() const {
  double s = 0.0;
  for (const auto& w : weights) s += w.squaredNorm();
  for (const auto& b : biases) s += b.squaredNorm();
  return s;
}

void MlpGrads::add_scaled(const MlpGrads& other, double scale) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += scale * other.weights[l];
    biases[l] += scale * other.biases[l];
  }
}

MlpGrads make_zero_grads(const MlpParams& params) {
  MlpGrads g;
  for (int l = 0; l < params.layer_count(); ++l) {
    g.weights.push_back(
        Eigen::MatrixXd::Zero(params.weights[l].rows(), params.weights[l].cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(params.biases[l].size()));
  }
  return g;
}

Eigen::MatrixXd mlp_backward(const MlpParams& params, const MlpCache& cache,
                             const Eigen::MatrixXd& grad_output,
                             MlpGrads& grads) {
  const int n_layers = params.layer_count();
  if (static_cast<int>(cache.activations.size()) != n_layers + 1) {
    throw UsageError("mlp_backward: cache does not match params");
  }
  // delta holds d(loss)/d(pre-activation of layer l+1).
  Eigen::MatrixXd delta = grad_output;
  for (int l = n_layers - 1; l >= 0; --l) {
    if (l + 1 < n_layers) {
      delta.array() *=
          activation_derivative(cache.activations[l + 1], params.activation);
    }
    grads.weights[l].noalias() += delta * cache.activations[l].transpose();
    grads.biases[l] += delta.rowwise().sum();
    if (l > 0) {
      delta = params.weights[l].transpose() * delta;
    } else {
      return params.weights[0].transpose() * delta;
    }
  }
  return delta;  // unreachable for layer_count >= 1
}

double mse_loss(const Eigen::MatrixXd& outputs, const Eigen::MatrixXd& targets) {
  if (outputs.rows() != targets.rows() || outputs.cols() != targets.cols()) {
    throw UsageError("mse_loss: shape mismatch");
  }
  if (outputs.cols() == 0) throw UsageError("mse_loss: empty batch");
  return (outputs - targets).squaredNorm() /
         static_cast<double>(outputs.size());
}

MlpGrads mlp_gradient(const MlpParams& params, const Eigen::MatrixXd& inputs,
                      const Eigen::MatrixXd& targets) {
  if (inputs.cols() == 0) throw UsageError("mlp_gradient: empty batch");
  if (targets.cols() != inputs.cols() ||
      targets.rows() != params.output_dim()) {
    throw UsageError("mlp_gradient: target shape mismatch");
  }
  MlpCache cache;
  const Eigen::MatrixXd out = mlp_forward_cached(params, inputs, cache);
  MlpGrads grads = make_zero_grads(params);
  const double scale = 2.0 / static_cast<double>(out.size());
  mlp_backward(params, cache, scale * (out - targets), grads);
  return grads;
}

double clip_gradient_norm(MlpGrads& grads, double max_norm) {
  const double norm = std::sqrt(grads.squared_norm());
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (auto& w : grads.weights) w *= scale;
    for (auto& b : grads.biases) b *= scale;
  }
  return norm;
}

AdamState adam_init(const MlpParams& params, double lr) {
  AdamState state;
  state.lr = lr;
  state.first_moment = make_zero_grads(params);
  state.second_moment = make_zero_grads(params);
  return state;
}

void adam_step(MlpParams& params, const MlpGrads& grads, AdamState& state) {
  if (grads.weights.size() != params.weights.size()) {
    throw UsageError("adam_step: gradient shape mismatch");
  }
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  auto update = [&](Eigen::Ref<Eigen::MatrixXd> p, const Eigen::MatrixXd& g,
                    Eigen::Ref<Eigen::MatrixXd> m, Eigen::Ref<Eigen::MatrixXd> v) {
    if (g.rows() != p.rows() || g.cols() != p.cols()) {
      throw UsageError("adam_step: gradient shape mismatch");
    }
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v.array().matrix() +
        (1.0 - state.beta2) * g.array().square().matrix();
    const Eigen::ArrayXXd m_hat = m.array() / bc1;
    const Eigen::ArrayXXd v_hat = v.array() / bc2;
    p.array() -= state.lr * m_hat / (v_hat.sqrt() + state.epsilon);
  };
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    update(params.weights[l], grads.weights[l], state.first_moment.weights[l],
           state.second_moment.weights[l]);
    Eigen::MatrixXd gb = grads.biases[l];
    Eigen::Map<Eigen::MatrixXd> mb(state.first_moment.biases[l].data(),
                                   state.first_moment.biases[l].size(), 1);
    Eigen::Map<Eigen::MatrixXd> vb(state.second_moment.biases[l].data(),
                                   state.second_moment.biases[l].size(), 1);
    Eigen::Map<Eigen::MatrixXd> pb(params.biases[l].data(),
                                   params.biases[l].size(), 1);
    update(pb, gb, mb, vb);
  }
}

}  // namespace dynoid
