#include "dynoid/regressor.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "csv_util.hpp"
#include "dynoid/errors.hpp"
#include "seed_util.hpp"

namespace dynoid {

CanonicalMatrices canonical_matrices(const StateMapSpec& spec) {
  if (!spec.valid()) throw UsageError("invalid state-map spec");
  const int L = spec.state_dim();
  const int b = spec.block_dim();
  CanonicalMatrices m;
  m.Abar = Eigen::MatrixXd::Zero(L, L);
  for (int i = 0; i + b < L; ++i) m.Abar(i, i + b) = 1.0;
  m.Bbar = Eigen::MatrixXd::Zero(L, spec.n_u);
  for (int j = 0; j < spec.n_u; ++j) m.Bbar(L - b + j, j) = 1.0;
  m.Sbar = Eigen::MatrixXd::Zero(L, spec.n_y);
  for (int j = 0; j < spec.n_y; ++j) m.Sbar(L - spec.n_y + j, j) = 1.0;
  return m;
}

Eigen::VectorXd build_state(const StateMapSpec& spec,
                            const Eigen::MatrixXd& u_window,
                            const Eigen::MatrixXd& y_window) {
  if (u_window.rows() != spec.ell || y_window.rows() != spec.ell ||
      u_window.cols() != spec.n_u || y_window.cols() != spec.n_y) {
    throw UsageError("window shape does not match spec");
  }
  Eigen::VectorXd z(spec.state_dim());
  const int b = spec.block_dim();
  for (int k = 0; k < spec.ell; ++k) {
    z.segment(k * b, spec.n_u) = u_window.row(k).transpose();
    z.segment(k * b + spec.n_u, spec.n_y) = y_window.row(k).transpose();
  }
  return z;
}

Eigen::VectorXd shift_update(const StateMapSpec& spec,
                             const Eigen::VectorXd& z,
                             const Eigen::VectorXd& u,
                             const Eigen::VectorXd& y) {
  const int L = spec.state_dim();
  const int b = spec.block_dim();
  if (z.size() != L || u.size() != spec.n_u || y.size() != spec.n_y) {
    throw UsageError("shift_update dimension mismatch");
  }
  Eigen::VectorXd out(L);
  out.head(L - b) = z.tail(L - b);
  out.segment(L - b, spec.n_u) = u;
  out.tail(spec.n_y) = y;
  return out;
}

Eigen::MatrixXd shift_update_batch(const StateMapSpec& spec,
                                   const Eigen::MatrixXd& z,
                                   const Eigen::MatrixXd& u,
                                   const Eigen::MatrixXd& y) {
  const int L = spec.state_dim();
  const int b = spec.block_dim();
  if (z.rows() != L || u.rows() != spec.n_u || y.rows() != spec.n_y ||
      z.cols() != u.cols() || z.cols() != y.cols()) {
    throw UsageError("shift_update dimension mismatch");
  }
  Eigen::MatrixXd out(L, z.cols());
  out.topRows(L - b) = z.bottomRows(L - b);
  out.middleRows(L - b, spec.n_u) = u;
  out.bottomRows(spec.n_y) = y;
  return out;
}

namespace {

/// Adjoint of the shift part: rows move toward higher indices, the first
/// block becomes zero.
Eigen::MatrixXd shift_adjoint(const StateMapSpec& spec,
                              const Eigen::MatrixXd& g) {
  const int L = spec.state_dim();
  const int b = spec.block_dim();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(L, g.cols());
  out.bottomRows(L - b) = g.topRows(L - b);
  return out;
}

/// Trajectory in normalized coordinates, time along columns.
struct NormTraj {
  Eigen::MatrixXd u;  // n_u x T
  Eigen::MatrixXd y;  // n_y x T
  int length() const { return static_cast<int>(u.cols()); }
};

NormTraj normalize_traj(const Trajectory& tr, const Normalization& norm) {
  NormTraj nt;
  nt.u = norm.normalize_u_rows(tr.inputs).transpose();
  nt.y = norm.normalize_y_rows(tr.outputs).transpose();
  return nt;
}

Eigen::VectorXd default_weights(int steps, double first_weight) {
  Eigen::VectorXd w = Eigen::VectorXd::Ones(steps);
  if (steps > 0) w(0) = first_weight;
  return w;
}

/// Forward-only weighted output-error loss over a normalized trajectory.
double forward_loss(const MlpParams& h, const StateMapSpec& spec,
                    const NormTraj& nt, const Eigen::VectorXd& weights) {
  const int T = nt.length();
  const int L = spec.state_dim();
  Eigen::VectorXd zin(L + spec.n_u);
  zin.head(L) = build_state(
      spec, nt.u.leftCols(spec.ell).transpose(),
      nt.y.leftCols(spec.ell).transpose());
  double loss = 0.0;
  for (int t = spec.ell; t < T; ++t) {
    zin.tail(spec.n_u) = nt.u.col(t);
    const Eigen::VectorXd yhat = mlp_forward(h, zin);
    loss += weights(t - spec.ell) * (nt.y.col(t) - yhat).squaredNorm();
    zin.head(L - spec.block_dim()) =
        zin.segment(spec.block_dim(), L - spec.block_dim()).eval();
    zin.segment(L - spec.block_dim(), spec.n_u) = nt.u.col(t);
    zin.segment(L - spec.n_y, spec.n_y) = yhat;
  }
  return loss / static_cast<double>(T - spec.ell);
}

void check_model_dims(const RegressorModel& model) {
  const StateMapSpec& s = model.spec;
  if (!s.valid()) throw UsageError("invalid state-map spec");
  if (model.h.input_dim() != s.state_dim() + s.n_u ||
      model.h.output_dim() != s.n_y) {
    throw UsageError("model network dims inconsistent with spec");
  }
}

}  // namespace

double regression_loss(const RegressorModel& model, const Trajectory& traj,
                       const Eigen::VectorXd* weights) {
  check_model_dims(model);
  const int T = traj.length();
  const int steps = T - model.spec.ell;
  if (steps < 1) throw UsageError("trajectory shorter than ell + 1");
  if (traj.inputs.cols() != model.spec.n_u ||
      traj.outputs.cols() != model.spec.n_y) {
    throw UsageError("trajectory channel counts do not match spec");
  }
  Eigen::VectorXd w =
      weights ? *weights : default_weights(steps, 10.0);
  if (w.size() != steps) throw UsageError("weight vector length mismatch");
  return forward_loss(model.h, model.spec,
                      normalize_traj(traj, model.normalization), w);
}

namespace {

struct Minibatch {
  std::vector<int> indices;  // into the trajectory list; equal lengths
  int length = 0;
};

/// One truncated-backprop pass over a minibatch. Accumulates parameter
/// gradients into grads and returns the batch loss.
double batch_backward(const MlpParams& h, const StateMapSpec& spec,
                      const std::vector<NormTraj>& trajs,
                      const Minibatch& batch, int chunk_len,
                      MlpGrads& grads) {
  const int L = spec.state_dim();
  const int b = spec.block_dim();
  const int B = static_cast<int>(batch.indices.size());
  const int T = batch.length;
  const int steps = T - spec.ell;
  const double weight_scale = 1.0 / (static_cast<double>(steps) * B);

  // Gather batched inputs/outputs, time along the block index.
  Eigen::MatrixXd U(spec.n_u, static_cast<Eigen::Index>(T) * B);
  Eigen::MatrixXd Y(spec.n_y, static_cast<Eigen::Index>(T) * B);
  for (int j = 0; j < B; ++j) {
    const NormTraj& nt = trajs[batch.indices[j]];
    for (int t = 0; t < T; ++t) {
      U.col(static_cast<Eigen::Index>(t) * B + j) = nt.u.col(t);
      Y.col(static_cast<Eigen::Index>(t) * B + j) = nt.y.col(t);
    }
  }
  auto u_at = [&](int t) {
    return U.middleCols(static_cast<Eigen::Index>(t) * B, B);
  };
  auto y_at = [&](int t) {
    return Y.middleCols(static_cast<Eigen::Index>(t) * B, B);
  };

  // Burn-in window from measured data.
  Eigen::MatrixXd z(L, B);
  for (int k = 0; k < spec.ell; ++k) {
    z.middleRows(k * b, spec.n_u) = u_at(k);
    z.middleRows(k * b + spec.n_u, spec.n_y) = y_at(k);
  }

  double loss = 0.0;
  std::vector<MlpCache> caches(chunk_len);
  std::vector<Eigen::MatrixXd> residuals(chunk_len);
  Eigen::MatrixXd input(L + spec.n_u, B);

  for (int chunk_start = spec.ell; chunk_start < T;
       chunk_start += chunk_len) {
    const int n = std::min(chunk_len, T - chunk_start);
    std::vector<Eigen::MatrixXd> zs(n + 1);
    zs[0] = z;
    for (int k = 0; k < n; ++k) {
      const int t = chunk_start + k;
      input.topRows(L) = zs[k];
      input.bottomRows(spec.n_u) = u_at(t);
      const Eigen::MatrixXd yhat = mlp_forward_cached(h, input, caches[k]);
      residuals[k] = y_at(t) - yhat;
      const double alpha = (t == spec.ell) ? 10.0 : 1.0;
      loss += alpha * weight_scale * residuals[k].squaredNorm();
      zs[k + 1] = shift_update_batch(spec, zs[k], u_at(t), yhat);
    }
    z = zs[n];

    // Gradients truncate at the chunk boundary: g_z enters the chunk as 0.
    Eigen::MatrixXd g_z = Eigen::MatrixXd::Zero(L, B);
    for (int k = n - 1; k >= 0; --k) {
      const int t = chunk_start + k;
      const double alpha = (t == spec.ell) ? 10.0 : 1.0;
      Eigen::MatrixXd g_y =
          (-2.0 * alpha * weight_scale) * residuals[k];
      g_y += g_z.bottomRows(spec.n_y);
      const Eigen::MatrixXd g_in = mlp_backward(h, caches[k], g_y, grads);
      g_z = shift_adjoint(spec, g_z) + g_in.topRows(L);
    }
  }
  return loss;
}

}  // namespace

double regression_loss_gradient(const RegressorModel& model,
                                const Trajectory& traj, MlpGrads& grads,
                                int chunk_len) {
  check_model_dims(model);
  const int steps = traj.length() - model.spec.ell;
  if (steps < 1) throw UsageError("trajectory shorter than ell + 1");
  if (traj.inputs.cols() != model.spec.n_u ||
      traj.outputs.cols() != model.spec.n_y) {
    throw UsageError("trajectory channel counts do not match spec");
  }
  if (chunk_len <= 0) chunk_len = steps;
  const std::vector<NormTraj> trajs = {
      normalize_traj(traj, model.normalization)};
  Minibatch batch;
  batch.indices = {0};
  batch.length = traj.length();
  grads = make_zero_grads(model.h);
  return batch_backward(model.h, model.spec, trajs, batch, chunk_len, grads);
}

RegressorModel train_regressor(const Dataset& dataset, const StateMapSpec& spec,
                               const TrainConfig& config, std::uint64_t seed,
                               TrainReport* report) {
  if (!spec.valid()) throw UsageError("invalid state-map spec");
  if (dataset.n_u != spec.n_u || dataset.n_y != spec.n_y) {
    throw UsageError("dataset channel counts do not match spec");
  }
  if (dataset.train.empty()) throw UsageError("empty training split");
  for (const Trajectory& tr : dataset.train) {
    if (tr.length() < spec.ell + 1) {
      throw UsageError("training trajectory shorter than ell + 1");
    }
  }

  // Deterministic processing order regardless of how the dataset was built.
  std::vector<int> order(dataset.train.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int c) {
    return dataset.train[a].id < dataset.train[c].id;
  });

  std::vector<NormTraj> trajs(dataset.train.size());
  for (std::size_t i = 0; i < dataset.train.size(); ++i) {
    trajs[i] = normalize_traj(dataset.train[order[i]], dataset.normalization);
  }
  std::vector<NormTraj> valid_trajs;
  valid_trajs.reserve(dataset.valid.size());
  for (const Trajectory& tr : dataset.valid) {
    if (tr.length() >= spec.ell + 1) {
      valid_trajs.push_back(normalize_traj(tr, dataset.normalization));
    }
  }

  std::map<int, std::vector<int>> by_length;
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    by_length[trajs[i].length()].push_back(static_cast<int>(i));
  }

  std::vector<int> dims;
  dims.push_back(spec.state_dim() + spec.n_u);
  dims.insert(dims.end(), config.hidden_dims.begin(),
              config.hidden_dims.end());
  dims.push_back(spec.n_y);
  MlpParams h = mlp_init(dims, config.activation, seed);
  AdamState adam = adam_init(h, config.lr);
  MlpGrads grads = make_zero_grads(h);

  auto validation_loss = [&](const MlpParams& params) {
    double sum = 0.0;
    for (const NormTraj& nt : valid_trajs) {
      sum += forward_loss(params, spec, nt,
                          default_weights(nt.length() - spec.ell, 10.0));
    }
    return valid_trajs.empty() ? std::numeric_limits<double>::quiet_NaN()
                               : sum / static_cast<double>(valid_trajs.size());
  };

  TrainReport local_report;
  TrainReport& rep = report ? *report : local_report;
  rep = TrainReport{};
  MlpParams best = h;
  bool have_best = false;

  const int batch_size = std::max(1, config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::mt19937_64 shuffle_rng(detail::mix_seed(seed, 7000 + epoch));
    std::vector<Minibatch> batches;
    for (auto& [length, group] : by_length) {
      std::vector<int> shuffled = group;
      std::shuffle(shuffled.begin(), shuffled.end(), shuffle_rng);
      for (std::size_t s = 0; s < shuffled.size(); s += batch_size) {
        Minibatch mb;
        mb.length = length;
        const std::size_t end = std::min(shuffled.size(), s + batch_size);
        mb.indices.assign(shuffled.begin() + s, shuffled.begin() + end);
        batches.push_back(std::move(mb));
      }
    }

    double epoch_loss = 0.0;
    long counted = 0;
    for (const Minibatch& mb : batches) {
      grads.set_zero();
      const double loss =
          batch_backward(h, spec, trajs, mb, config.chunk_len, grads);
      if (!std::isfinite(loss)) {
        throw TrainingError("non-finite training loss", epoch);
      }
      epoch_loss += loss * static_cast<double>(mb.indices.size());
      counted += static_cast<long>(mb.indices.size());
      clip_gradient_norm(grads, config.grad_clip);
      adam_step(h, grads, adam);
    }
    epoch_loss /= static_cast<double>(counted);
    rep.train_loss.push_back(epoch_loss);

    const bool last = epoch + 1 == config.epochs;
    if (!valid_trajs.empty() &&
        ((epoch + 1) % config.valid_every == 0 || last)) {
      const double vl = validation_loss(h);
      if (!std::isfinite(vl)) {
        throw TrainingError("non-finite validation loss", epoch);
      }
      rep.valid_loss.emplace_back(epoch, vl);
      if (!have_best || vl < rep.best_valid_loss) {
        rep.best_valid_loss = vl;
        rep.best_epoch = epoch;
        best = h;
        have_best = true;
      }
      if (config.verbose) {
        std::cerr << "epoch " << epoch << " train " << epoch_loss << " valid "
                  << vl << "\n";
      }
    } else if (config.verbose && (epoch + 1) % config.valid_every == 0) {
      std::cerr << "epoch " << epoch << " train " << epoch_loss << "\n";
    }
  }

  RegressorModel model;
  model.spec = spec;
  model.normalization = dataset.normalization;
  model.h = have_best ? best : h;
  if (!have_best) {
    rep.best_epoch = config.epochs - 1;
    rep.best_valid_loss =
        rep.train_loss.empty() ? 0.0 : rep.train_loss.back();
  }
  return model;
}

Eigen::MatrixXd rollout_core(
    const StateMapSpec& spec,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd& z,
                                        const Eigen::VectorXd& u)>& h,
    const Eigen::MatrixXd& init_u, const Eigen::MatrixXd& init_y,
    const Eigen::MatrixXd& inputs) {
  if (inputs.cols() != spec.n_u) throw UsageError("input width mismatch");
  Eigen::VectorXd z = build_state(spec, init_u, init_y);
  const int T = static_cast<int>(inputs.rows());
  Eigen::MatrixXd out(T, spec.n_y);
  for (int t = 0; t < T; ++t) {
    const Eigen::VectorXd u = inputs.row(t).transpose();
    const Eigen::VectorXd y = h(z, u);
    if (y.size() != spec.n_y) throw UsageError("output map width mismatch");
    out.row(t) = y.transpose();
    z = shift_update(spec, z, u, y);
  }
  return out;
}

Eigen::MatrixXd rollout(const RegressorModel& model,
                        const Eigen::MatrixXd& init_u,
                        const Eigen::MatrixXd& init_y,
                        const Eigen::MatrixXd& inputs) {
  check_model_dims(model);
  const Normalization& norm = model.normalization;
  const int L = model.spec.state_dim();
  auto h = [&](const Eigen::VectorXd& z, const Eigen::VectorXd& u) {
    Eigen::VectorXd in(L + model.spec.n_u);
    in.head(L) = z;
    in.tail(model.spec.n_u) = u;
    return mlp_forward(model.h, in);
  };
  const Eigen::MatrixXd normalized = rollout_core(
      model.spec, h, norm.normalize_u_rows(init_u),
      norm.normalize_y_rows(init_y), norm.normalize_u_rows(inputs));
  return norm.denormalize_y_rows(normalized);
}

RolloutEval evaluate_rollout(const RegressorModel& model,
                             const std::vector<Trajectory>& split,
                             int horizon) {
  check_model_dims(model);
  if (horizon < 1) throw UsageError("horizon must be positive");
  const int ell = model.spec.ell;
  RolloutEval eval;
  eval.window_size = ell;
  eval.horizon = horizon;
  double sum = 0.0;
  for (const Trajectory& tr : split) {
    if (tr.length() < ell + horizon) {
      std::cerr << "warning: trajectory " << tr.id
                << " too short for horizon " << horizon << ", skipped\n";
      eval.skipped.push_back(tr.id);
      continue;
    }
    const Eigen::MatrixXd pred =
        rollout(model, tr.inputs.topRows(ell), tr.outputs.topRows(ell),
                tr.inputs.middleRows(ell, horizon));
    const double mse =
        (pred - tr.outputs.middleRows(ell, horizon)).squaredNorm() /
        static_cast<double>(horizon * model.spec.n_y);
    eval.per_trajectory.push_back({tr.id, mse});
    sum += mse;
  }
  if (!eval.per_trajectory.empty()) {
    sum /= static_cast<double>(eval.per_trajectory.size());
  }
  eval.mean_mse = sum;
  return eval;
}

void write_rollout_csv(const RolloutEval& eval, const std::string& path) {
  std::ofstream out = detail::open_csv(path);
  out << "trajectory_id,window_size,horizon,mse\n";
  for (const RolloutEval::Entry& e : eval.per_trajectory) {
    out << e.trajectory_id << ',' << eval.window_size << ',' << eval.horizon
        << ',' << detail::fmt_g17(e.mse) << '\n';
  }
  detail::finish_csv(out, path);
}

}  // namespace dynoid
