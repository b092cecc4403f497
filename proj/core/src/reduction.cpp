#include "dynoid/reduction.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>

#include "csv_util.hpp"
#include "dynoid/errors.hpp"
#include "seed_util.hpp"

namespace dynoid {

namespace {

long count_windows(const std::vector<Trajectory>& split, int ell,
                   bool with_target) {
  long n = 0;
  for (const Trajectory& tr : split) {
    const long usable = tr.length() - ell + (with_target ? 0 : 1);
    if (usable > 0) n += usable;
  }
  return n;
}

}  // namespace

Eigen::MatrixXd collect_states(const std::vector<Trajectory>& split,
                               const StateMapSpec& spec,
                               const Normalization& norm) {
  const int L = spec.state_dim();
  Eigen::MatrixXd states(L, count_windows(split, spec.ell, false));
  Eigen::Index col = 0;
  for (const Trajectory& tr : split) {
    if (tr.length() < spec.ell) continue;
    const Eigen::MatrixXd u = norm.normalize_u_rows(tr.inputs);
    const Eigen::MatrixXd y = norm.normalize_y_rows(tr.outputs);
    for (int t = spec.ell; t <= tr.length(); ++t) {
      states.col(col++) = build_state(spec, u.middleRows(t - spec.ell, spec.ell),
                                      y.middleRows(t - spec.ell, spec.ell));
    }
  }
  return states;
}

StateTargets collect_state_targets(const std::vector<Trajectory>& split,
                                   const StateMapSpec& spec,
                                   const Normalization& norm) {
  const int L = spec.state_dim();
  const long n = count_windows(split, spec.ell, true);
  StateTargets st;
  st.z.resize(L, n);
  st.u.resize(spec.n_u, n);
  st.y.resize(spec.n_y, n);
  Eigen::Index col = 0;
  for (const Trajectory& tr : split) {
    if (tr.length() < spec.ell + 1) continue;
    const Eigen::MatrixXd u = norm.normalize_u_rows(tr.inputs);
    const Eigen::MatrixXd y = norm.normalize_y_rows(tr.outputs);
    for (int t = spec.ell; t < tr.length(); ++t) {
      st.z.col(col) = build_state(spec, u.middleRows(t - spec.ell, spec.ell),
                                  y.middleRows(t - spec.ell, spec.ell));
      st.u.col(col) = u.row(t).transpose();
      st.y.col(col) = y.row(t).transpose();
      ++col;
    }
  }
  return st;
}

namespace {

double joint_forward_loss(const MlpParams& encoder, const MlpParams& decoder,
                          const MlpParams* h, const Eigen::MatrixXd& z,
                          const Eigen::MatrixXd* u, const Eigen::MatrixXd* y) {
  const Eigen::MatrixXd recon = mlp_forward_batch(decoder,
                                                  mlp_forward_batch(encoder, z));
  double loss = mse_loss(recon, z);
  if (h) {
    Eigen::MatrixXd in(recon.rows() + u->rows(), z.cols());
    in.topRows(recon.rows()) = recon;
    in.bottomRows(u->rows()) = *u;
    loss += mse_loss(mlp_forward_batch(*h, in), *y);
  }
  return loss;
}

void clip_joint_norm(MlpGrads& ge, MlpGrads& gd, double max_norm) {
  const double norm = std::sqrt(ge.squared_norm() + gd.squared_norm());
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    ge.add_scaled(ge, scale - 1.0);
    gd.add_scaled(gd, scale - 1.0);
  }
}

}  // namespace

Autoencoder train_autoencoder(const Eigen::MatrixXd& states,
                              const StateMapSpec& spec, int latent_dim,
                              const TrainConfig& config, std::uint64_t seed,
                              const StateTargets* targets, const MlpParams* h,
                              TrainReport* report) {
  const int L = spec.state_dim();
  if (states.rows() != L) throw UsageError("state rows do not match spec");
  if (states.cols() < 2) throw UsageError("need at least two state samples");
  if (latent_dim < 1 || latent_dim > L) {
    throw UsageError("latent dim must be in [1, L]");
  }
  const bool joint = config.joint_reconstruction;
  if (joint) {
    if (!targets || !h) {
      throw UsageError("joint reconstruction needs targets and a predictor");
    }
    if (targets->u.cols() != states.cols()) {
      throw UsageError("joint targets must pair the state columns");
    }
  }

  std::vector<int> dims_e;
  dims_e.push_back(L);
  dims_e.insert(dims_e.end(), config.hidden_dims.begin(),
                config.hidden_dims.end());
  dims_e.push_back(latent_dim);
  std::vector<int> dims_d;
  dims_d.push_back(latent_dim);
  dims_d.insert(dims_d.end(), config.hidden_dims.rbegin(),
                config.hidden_dims.rend());
  dims_d.push_back(L);

  Autoencoder ae;
  ae.source_spec = spec;
  ae.latent_dim = latent_dim;
  ae.encoder = mlp_init(dims_e, config.activation, detail::mix_seed(seed, 1));
  ae.decoder = mlp_init(dims_d, config.activation, detail::mix_seed(seed, 2));

  const Eigen::Index n = states.cols();
  std::vector<int> indices(n);
  std::iota(indices.begin(), indices.end(), 0);
  std::mt19937_64 split_rng(detail::mix_seed(seed, 3));
  std::shuffle(indices.begin(), indices.end(), split_rng);
  Eigen::Index n_valid = static_cast<Eigen::Index>(
      std::llround(config.valid_fraction * static_cast<double>(n)));
  n_valid = std::min(n - 1, std::max<Eigen::Index>(0, n_valid));
  std::vector<int> valid_idx(indices.begin(), indices.begin() + n_valid);
  std::vector<int> train_idx(indices.begin() + n_valid, indices.end());

  auto gather = [&](const Eigen::MatrixXd& src, const std::vector<int>& idx) {
    Eigen::MatrixXd out(src.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out.col(i) = src.col(idx[i]);
    return out;
  };
  const Eigen::MatrixXd valid_z = gather(states, valid_idx);
  const Eigen::MatrixXd valid_u =
      joint ? gather(targets->u, valid_idx) : Eigen::MatrixXd();
  const Eigen::MatrixXd valid_y =
      joint ? gather(targets->y, valid_idx) : Eigen::MatrixXd();

  AdamState adam_e = adam_init(ae.encoder, config.lr);
  AdamState adam_d = adam_init(ae.decoder, config.lr);
  MlpGrads ge = make_zero_grads(ae.encoder);
  MlpGrads gd = make_zero_grads(ae.decoder);
  MlpGrads h_sink = h ? make_zero_grads(*h) : MlpGrads{};

  TrainReport local_report;
  TrainReport& rep = report ? *report : local_report;
  rep = TrainReport{};
  MlpParams best_e = ae.encoder;
  MlpParams best_d = ae.decoder;
  bool have_best = false;

  const int batch = std::max(1, config.batch_size * 32);
  MlpCache cache_e, cache_d, cache_h;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::mt19937_64 rng(detail::mix_seed(seed, 9000 + epoch));
    std::shuffle(train_idx.begin(), train_idx.end(), rng);

    double epoch_loss = 0.0;
    long counted = 0;
    for (std::size_t s = 0; s < train_idx.size();
         s += static_cast<std::size_t>(batch)) {
      const std::size_t end =
          std::min(train_idx.size(), s + static_cast<std::size_t>(batch));
      const std::vector<int> mb(train_idx.begin() + s, train_idx.begin() + end);
      const Eigen::Index B = static_cast<Eigen::Index>(mb.size());
      const Eigen::MatrixXd zb = gather(states, mb);

      const Eigen::MatrixXd latent = mlp_forward_cached(ae.encoder, zb, cache_e);
      const Eigen::MatrixXd recon = mlp_forward_cached(ae.decoder, latent,
                                                       cache_d);
      const Eigen::MatrixXd residual = recon - zb;
      double loss =
          residual.squaredNorm() / static_cast<double>(B * L);
      Eigen::MatrixXd g_recon =
          (2.0 / static_cast<double>(B * L)) * residual;

      if (joint) {
        const Eigen::MatrixXd ub = gather(targets->u, mb);
        const Eigen::MatrixXd yb = gather(targets->y, mb);
        Eigen::MatrixXd in(L + spec.n_u, B);
        in.topRows(L) = recon;
        in.bottomRows(spec.n_u) = ub;
        const Eigen::MatrixXd pred = mlp_forward_cached(*h, in, cache_h);
        const Eigen::MatrixXd pred_res = pred - yb;
        loss += pred_res.squaredNorm() / static_cast<double>(B * spec.n_y);
        const Eigen::MatrixXd g_pred =
            (2.0 / static_cast<double>(B * spec.n_y)) * pred_res;
        h_sink.set_zero();  // h stays frozen; only its input gradient is used
        g_recon += mlp_backward(*h, cache_h, g_pred, h_sink).topRows(L);
      }

      if (!std::isfinite(loss)) {
        throw TrainingError("non-finite autoencoder loss", epoch);
      }
      epoch_loss += loss * static_cast<double>(B);
      counted += B;

      ge.set_zero();
      gd.set_zero();
      const Eigen::MatrixXd g_latent =
          mlp_backward(ae.decoder, cache_d, g_recon, gd);
      mlp_backward(ae.encoder, cache_e, g_latent, ge);
      clip_joint_norm(ge, gd, config.grad_clip);
      adam_step(ae.encoder, ge, adam_e);
      adam_step(ae.decoder, gd, adam_d);
    }
    epoch_loss /= static_cast<double>(counted);
    rep.train_loss.push_back(epoch_loss);

    const bool last = epoch + 1 == config.epochs;
    if (n_valid > 0 && ((epoch + 1) % config.valid_every == 0 || last)) {
      const double vl = joint_forward_loss(ae.encoder, ae.decoder,
                                           joint ? h : nullptr, valid_z,
                                           &valid_u, &valid_y);
      if (!std::isfinite(vl)) {
        throw TrainingError("non-finite autoencoder validation loss", epoch);
      }
      rep.valid_loss.emplace_back(epoch, vl);
      if (!have_best || vl < rep.best_valid_loss) {
        rep.best_valid_loss = vl;
        rep.best_epoch = epoch;
        best_e = ae.encoder;
        best_d = ae.decoder;
        have_best = true;
      }
      if (config.verbose) {
        std::cerr << "ae epoch " << epoch << " train " << epoch_loss
                  << " valid " << vl << "\n";
      }
    }
  }

  if (have_best) {
    ae.encoder = best_e;
    ae.decoder = best_d;
  } else {
    rep.best_epoch = config.epochs - 1;
    rep.best_valid_loss =
        rep.train_loss.empty() ? 0.0 : rep.train_loss.back();
  }
  return ae;
}

double reconstruction_mse(const Autoencoder& ae,
                          const Eigen::MatrixXd& states) {
  if (states.rows() != ae.source_spec.state_dim()) {
    throw UsageError("state rows do not match autoencoder spec");
  }
  return mse_loss(
      mlp_forward_batch(ae.decoder, mlp_forward_batch(ae.encoder, states)),
      states);
}

double reconstruction_loss_gradient(const Autoencoder& ae,
                                    const Eigen::MatrixXd& states,
                                    MlpGrads& encoder_grads,
                                    MlpGrads& decoder_grads) {
  const int L = ae.source_spec.state_dim();
  if (states.rows() != L || states.cols() < 1) {
    throw UsageError("state batch does not match autoencoder spec");
  }
  encoder_grads = make_zero_grads(ae.encoder);
  decoder_grads = make_zero_grads(ae.decoder);
  MlpCache cache_e, cache_d;
  const Eigen::MatrixXd latent =
      mlp_forward_cached(ae.encoder, states, cache_e);
  const Eigen::MatrixXd recon =
      mlp_forward_cached(ae.decoder, latent, cache_d);
  const Eigen::MatrixXd residual = recon - states;
  const double scale = 2.0 / (static_cast<double>(states.cols()) * L);
  const Eigen::MatrixXd g_latent =
      mlp_backward(ae.decoder, cache_d, scale * residual, decoder_grads);
  mlp_backward(ae.encoder, cache_e, g_latent, encoder_grads);
  return mse_loss(recon, states);
}

namespace {

void check_pairing(const RegressorModel& model, const Autoencoder& ae) {
  const StateMapSpec& a = model.spec;
  const StateMapSpec& b = ae.source_spec;
  if (a.ell != b.ell || a.n_u != b.n_u || a.n_y != b.n_y) {
    throw UsageError("autoencoder was built for a different window spec");
  }
}

}  // namespace

Eigen::MatrixXd reduced_rollout(const RegressorModel& model,
                                const Autoencoder& ae,
                                const Eigen::MatrixXd& init_u,
                                const Eigen::MatrixXd& init_y,
                                const Eigen::MatrixXd& inputs) {
  check_pairing(model, ae);
  const StateMapSpec& spec = model.spec;
  const Normalization& norm = model.normalization;
  const int L = spec.state_dim();
  if (inputs.cols() != spec.n_u) throw UsageError("input width mismatch");

  const Eigen::VectorXd z0 =
      build_state(spec, norm.normalize_u_rows(init_u),
                  norm.normalize_y_rows(init_y));
  Eigen::VectorXd latent = mlp_forward(ae.encoder, z0);

  const int T = static_cast<int>(inputs.rows());
  const Eigen::MatrixXd u_norm = norm.normalize_u_rows(inputs);
  Eigen::MatrixXd out(T, spec.n_y);
  Eigen::VectorXd in(L + spec.n_u);
  for (int t = 0; t < T; ++t) {
    const Eigen::VectorXd decoded = mlp_forward(ae.decoder, latent);
    const Eigen::VectorXd u = u_norm.row(t).transpose();
    in.head(L) = decoded;
    in.tail(spec.n_u) = u;
    const Eigen::VectorXd yhat = mlp_forward(model.h, in);
    out.row(t) = yhat.transpose();
    latent = mlp_forward(ae.encoder, shift_update(spec, decoded, u, yhat));
  }
  return norm.denormalize_y_rows(out);
}

RolloutEval evaluate_reduced_rollout(const RegressorModel& model,
                                     const Autoencoder& ae,
                                     const std::vector<Trajectory>& split,
                                     int horizon) {
  check_pairing(model, ae);
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
    const Eigen::MatrixXd pred = reduced_rollout(
        model, ae, tr.inputs.topRows(ell), tr.outputs.topRows(ell),
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

int latent_dim_for_rate(const StateMapSpec& spec, double rate) {
  if (!(rate > 0.0 && rate <= 1.0))
    throw UsageError("compression rate must lie in (0, 1]");
  const int L = spec.state_dim();
  const int keep = static_cast<int>(std::lround((1.0 - rate) * L));
  return std::min(L, std::max(1, keep));
}

std::vector<SweepRow> compression_sweep(
    const RegressorModel& model, const Dataset& dataset,
    const std::vector<double>& rates, const TrainConfig& config,
    std::uint64_t seed, int horizon,
    std::vector<std::optional<Autoencoder>>* collect_autoencoders) {
  for (double r : rates) {
    if (!(r > 0.0 && r <= 1.0)) {
      throw UsageError("compression rates must lie in (0, 1]");
    }
  }
  const Eigen::MatrixXd train_states =
      collect_states(dataset.train, model.spec, model.normalization);
  const Eigen::MatrixXd test_states =
      collect_states(dataset.test, model.spec, model.normalization);
  // Joint training scores reconstructions through the frozen predictor,
  // which needs the (z, u, y) pairing instead of the bare states.
  std::optional<StateTargets> targets;
  if (config.joint_reconstruction) {
    targets =
        collect_state_targets(dataset.train, model.spec, model.normalization);
  }

  std::vector<SweepRow> rows;
  rows.reserve(rates.size());
  for (std::size_t i = 0; i < rates.size(); ++i) {
    SweepRow row;
    row.window_size = model.spec.ell;
    row.rate = rates[i];
    row.latent_dim = latent_dim_for_rate(model.spec, rates[i]);
    std::optional<Autoencoder> trained;
    try {
      const Autoencoder ae = train_autoencoder(
          config.joint_reconstruction ? targets->z : train_states,
          model.spec, row.latent_dim, config, detail::mix_seed(seed, 40 + i),
          targets ? &*targets : nullptr, targets ? &model.h : nullptr);
      row.recon_mse = reconstruction_mse(ae, test_states);
      row.rollout_mse =
          evaluate_reduced_rollout(model, ae, dataset.test, horizon).mean_mse;
      trained = ae;
    } catch (const std::exception& e) {
      std::cerr << "sweep cell rate " << rates[i] << " failed: " << e.what()
                << "\n";
      row.recon_mse = std::numeric_limits<double>::quiet_NaN();
      row.rollout_mse = std::numeric_limits<double>::quiet_NaN();
    }
    if (collect_autoencoders) collect_autoencoders->push_back(trained);
    rows.push_back(row);
  }
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows,
                     const std::string& path) {
  std::ofstream out = detail::open_csv(path);
  out << "window_size,rate,latent_dim,recon_mse,rollout_mse\n";
  for (const SweepRow& r : rows) {
    out << r.window_size << ',' << detail::fmt_g17(r.rate) << ','
        << r.latent_dim << ',' << detail::fmt_g17(r.recon_mse) << ','
        << detail::fmt_g17(r.rollout_mse) << '\n';
  }
  detail::finish_csv(out, path);
}

}  // namespace dynoid
