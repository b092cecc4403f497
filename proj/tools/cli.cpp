#include "cli.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dynoid/checkpoint.hpp"
#include "dynoid/config.hpp"
#include "dynoid/datagen.hpp"
#include "dynoid/diagnostics.hpp"
#include "dynoid/errors.hpp"
#include "dynoid/reduction.hpp"
#include "dynoid/regressor.hpp"
#include "dynoid/systems.hpp"

namespace fs = std::filesystem;

namespace {

using namespace dynoid;

std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create directory " + dir.string() + ": " +
                  ec.message());
  }
}

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::string data_dir;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  bool verbose = false;
};

void add_common(CLI::App* sub, CommonOpts& o, bool takes_data) {
  sub->add_option("--config", o.config_path,
                  "JSON experiment config; omitted keys keep defaults");
  sub->add_option("-o,--out", o.out_dir, "output directory");
  if (takes_data) {
    sub->add_option("--data", o.data_dir,
                    "directory holding header.json and dataset.jsonl "
                    "(default: the output directory)");
  }
  sub->add_option("--seed", o.seed,
                  "RNG seed; overrides DYNOID_SEED and the config value");
  sub->add_option("--threads", o.threads, "cap Eigen's internal thread count");
  sub->add_flag("-v,--verbose", o.verbose, "log training progress to stderr");
}

ExperimentConfig make_config(const CommonOpts& o) {
  ExperimentConfig cfg =
      o.config_path.empty() ? default_config() : load_config(o.config_path);
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  return cfg;
}

void apply_threads(int threads) {
  if (threads > 0) Eigen::setNbThreads(threads);
}

fs::path dataset_dir(const CommonOpts& o, const ExperimentConfig& cfg) {
  return o.data_dir.empty() ? fs::path(cfg.out_dir) : fs::path(o.data_dir);
}

Dataset load_dataset_from(const fs::path& dir) {
  return load_dataset((dir / "header.json").string(),
                      (dir / "dataset.jsonl").string());
}

struct TrainOverrides {
  std::optional<int> epochs;
  std::optional<double> lr;
};

void add_train_overrides(CLI::App* sub, TrainOverrides& ov) {
  sub->add_option("--epochs", ov.epochs, "override the configured epoch count");
  sub->add_option("--lr", ov.lr, "override the configured learning rate");
}

void apply_overrides(TrainConfig& tc, const TrainOverrides& ov, bool verbose) {
  if (ov.epochs) tc.epochs = *ov.epochs;
  if (ov.lr) tc.lr = *ov.lr;
  if (verbose) tc.verbose = true;
}

/// Single-window runs keep model.json at the top of the output directory;
/// multi-window runs get one l<ell>/ subdirectory per window.
fs::path model_dir(const fs::path& out, int ell, bool single) {
  if (single && fs::exists(out / "model.json")) return out;
  return out / ("l" + std::to_string(ell));
}

RegressorModel load_model_checked(const fs::path& dir, int ell) {
  RegressorModel model = load_model((dir / "model.json").string());
  if (model.spec.ell != ell) {
    throw UsageError("model at " + (dir / "model.json").string() +
                     " was trained with window size " +
                     std::to_string(model.spec.ell) + ", requested " +
                     std::to_string(ell));
  }
  return model;
}

void write_loss_csv(const TrainReport& report, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << "epoch,train_loss,valid_loss\n";
  const std::map<int, double> valid(report.valid_loss.begin(),
                                    report.valid_loss.end());
  for (std::size_t e = 0; e < report.train_loss.size(); ++e) {
    f << e << ',' << g17(report.train_loss[e]) << ',';
    if (auto it = valid.find(static_cast<int>(e)); it != valid.end()) {
      f << g17(it->second);
    }
    f << '\n';
  }
  if (!f.good()) throw IoError("write failed: " + path);
}

struct EvalRow {
  int window_size = 0;
  int horizon = 0;
  double mean_mse = 0.0;
  int n_trajectories = 0;
};

void write_eval_csv(const std::vector<EvalRow>& rows, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << "window_size,horizon,mean_mse,n_trajectories\n";
  for (const auto& r : rows) {
    f << r.window_size << ',' << r.horizon << ',' << g17(r.mean_mse) << ','
      << r.n_trajectories << '\n';
  }
  if (!f.good()) throw IoError("write failed: " + path);
}

// --- subcommands ---

struct GenOpts {
  CommonOpts common;
  std::string system;
};

void cmd_gen_data(const GenOpts& go) {
  ExperimentConfig cfg = make_config(go.common);
  if (!go.system.empty()) cfg.system = go.system;
  validate_config(cfg);
  cfg.seed = resolve_seed(cfg, go.common.seed);
  apply_threads(go.common.threads);

  const fs::path out = cfg.out_dir;
  ensure_dir(out);
  const Dataset ds = cfg.system == "tank"
                         ? generate_tank_dataset(cfg.tank, cfg.seed)
                         : generate_drone_dataset(cfg.drone, cfg.seed);
  save_dataset(ds, (out / "header.json").string(),
               (out / "dataset.jsonl").string());
  save_config(cfg, (out / "config.json").string());

  const int steps = ds.train.empty() ? 0 : ds.train.front().length();
  const Eigen::VectorXd& sigma =
      cfg.system == "tank" ? cfg.tank.noise_sigma : cfg.drone.noise_sigma;
  std::printf("%s dataset: %zu train / %zu valid / %zu test trajectories "
              "(%zu total), %d steps each\n",
              cfg.system.c_str(), ds.train.size(), ds.valid.size(),
              ds.test.size(), ds.train.size() + ds.valid.size() + ds.test.size(),
              steps);
  std::printf("output noise sigma:");
  for (int i = 0; i < sigma.size(); ++i) std::printf(" %g", sigma[i]);
  std::printf("\nwrote %s and %s\n", (out / "header.json").string().c_str(),
              (out / "dataset.jsonl").string().c_str());
}

struct TrainOpts {
  CommonOpts common;
  std::vector<int> windows;
  TrainOverrides ov;
};

void cmd_train(const TrainOpts& to) {
  ExperimentConfig cfg = make_config(to.common);
  if (!to.windows.empty()) cfg.window_sizes = to.windows;
  validate_config(cfg);
  cfg.seed = resolve_seed(cfg, to.common.seed);
  apply_threads(to.common.threads);
  apply_overrides(cfg.regressor_training, to.ov, to.common.verbose);

  const fs::path out = cfg.out_dir;
  const Dataset ds = load_dataset_from(dataset_dir(to.common, cfg));
  ensure_dir(out);
  save_config(cfg, (out / "config.json").string());

  const bool single = cfg.window_sizes.size() == 1;
  for (int ell : cfg.window_sizes) {
    const StateMapSpec spec{ell, ds.n_u, ds.n_y};
    const fs::path dir = single ? out : out / ("l" + std::to_string(ell));
    ensure_dir(dir);
    TrainReport report;
    const RegressorModel model =
        train_regressor(ds, spec, cfg.regressor_training, cfg.seed, &report);
    save_model(model, (dir / "model.json").string());
    write_loss_csv(report, (dir / "train_loss.csv").string());
    std::printf("ell=%d: %zu epochs, final train loss %g", ell,
                report.train_loss.size(),
                report.train_loss.empty() ? 0.0 : report.train_loss.back());
    if (report.best_epoch >= 0) {
      std::printf(", best valid loss %g at epoch %d", report.best_valid_loss,
                  report.best_epoch);
    }
    std::printf(" -> %s\n", (dir / "model.json").string().c_str());
  }
}

struct EvalOpts {
  CommonOpts common;
  std::vector<int> windows;
  std::optional<int> horizon;
  std::string split = "test";
};

void cmd_eval(const EvalOpts& eo) {
  ExperimentConfig cfg = make_config(eo.common);
  if (!eo.windows.empty()) cfg.window_sizes = eo.windows;
  if (eo.horizon) cfg.eval_horizon = *eo.horizon;
  validate_config(cfg);
  apply_threads(eo.common.threads);

  const fs::path out = cfg.out_dir;
  const Dataset ds = load_dataset_from(dataset_dir(eo.common, cfg));
  const std::vector<Trajectory>& split = ds.split(eo.split);
  ensure_dir(out);
  save_config(cfg, (out / "config.json").string());

  const bool single = cfg.window_sizes.size() == 1;
  std::vector<EvalRow> rows;
  for (int ell : cfg.window_sizes) {
    const fs::path dir = model_dir(out, ell, single);
    const RegressorModel model = load_model_checked(dir, ell);
    const RolloutEval ev = evaluate_rollout(model, split, cfg.eval_horizon);
    write_rollout_csv(ev, (dir / "eval_detail.csv").string());
    rows.push_back({ell, cfg.eval_horizon, ev.mean_mse,
                    static_cast<int>(ev.per_trajectory.size())});
    std::printf("ell=%d: mean %d-step rollout MSE %g over %zu %s "
                "trajectories\n",
                ell, cfg.eval_horizon, ev.mean_mse, ev.per_trajectory.size(),
                eo.split.c_str());
  }
  write_eval_csv(rows, (out / "eval.csv").string());
  std::printf("wrote %s\n", (out / "eval.csv").string().c_str());
}

struct ReduceOpts {
  CommonOpts common;
  std::optional<int> window;
  std::vector<double> rates;
  std::optional<double> save_rate;
  std::optional<int> horizon;
  TrainOverrides ov;
};

void cmd_reduce(const ReduceOpts& ro) {
  ExperimentConfig cfg = make_config(ro.common);
  if (!ro.rates.empty()) cfg.reduction_rates = ro.rates;
  if (ro.horizon) cfg.eval_horizon = *ro.horizon;
  validate_config(cfg);
  cfg.seed = resolve_seed(cfg, ro.common.seed);
  apply_threads(ro.common.threads);
  apply_overrides(cfg.autoencoder_training, ro.ov, ro.common.verbose);

  const fs::path out = cfg.out_dir;
  const Dataset ds = load_dataset_from(dataset_dir(ro.common, cfg));
  ensure_dir(out);
  save_config(cfg, (out / "config.json").string());

  RegressorModel model = [&] {
    if (ro.window) return load_model_checked(model_dir(out, *ro.window, true),
                                             *ro.window);
    return load_model((out / "model.json").string());
  }();

  std::vector<std::optional<Autoencoder>> aes;
  const std::vector<SweepRow> rows =
      compression_sweep(model, ds, cfg.reduction_rates,
                        cfg.autoencoder_training, cfg.seed, cfg.eval_horizon,
                        &aes);
  write_sweep_csv(rows, (out / "sweep.csv").string());
  for (const auto& r : rows) {
    std::printf("rate %.2f (latent %d): recon MSE %g, rollout MSE %g\n",
                r.rate, r.latent_dim, r.recon_mse, r.rollout_mse);
  }
  std::printf("wrote %s\n", (out / "sweep.csv").string().c_str());

  const double target =
      ro.save_rate ? *ro.save_rate : cfg.reduction_rates.front();
  std::size_t idx = cfg.reduction_rates.size();
  for (std::size_t i = 0; i < cfg.reduction_rates.size(); ++i) {
    if (cfg.reduction_rates[i] == target) {
      idx = i;
      break;
    }
  }
  if (idx == cfg.reduction_rates.size()) {
    throw UsageError("--save-rate " + g17(target) +
                     " is not one of the swept rates");
  }
  if (!aes[idx]) {
    throw NumericError("autoencoder for rate " + g17(target) +
                       " failed to train; autoencoder.json not written");
  }
  save_autoencoder(*aes[idx], (out / "autoencoder.json").string());
  std::printf("saved rate-%.2f autoencoder to %s\n", target,
              (out / "autoencoder.json").string().c_str());
}

struct DiagnoseOpts {
  CommonOpts common;
  std::string system;
  std::optional<int> ell;
  std::optional<double> noise;
  std::optional<int> trials;
};

void cmd_diagnose(const DiagnoseOpts& dopt) {
  ExperimentConfig cfg = make_config(dopt.common);
  if (!dopt.system.empty()) cfg.system = dopt.system;
  if (dopt.ell) cfg.diagnostics.ell = *dopt.ell;
  if (dopt.noise) cfg.diagnostics.noise_level = *dopt.noise;
  if (dopt.trials) cfg.diagnostics.trials = *dopt.trials;
  validate_config(cfg);
  cfg.seed = resolve_seed(cfg, dopt.common.seed);
  apply_threads(dopt.common.threads);

  const fs::path out = cfg.out_dir;
  ensure_dir(out);
  save_config(cfg, (out / "config.json").string());

  BoundCheckConfig bc;
  bc.constant_samples = cfg.diagnostics.constant_samples;
  bc.invert.grid_points = cfg.diagnostics.grid_points;
  bc.invert.sweeps = cfg.diagnostics.sweeps;

  std::unique_ptr<Plant> plant;
  if (cfg.system == "tank") {
    plant = std::make_unique<TankPlant>(cfg.tank.plant);
    // Sampling box starts at 0.1: the tank dynamics are not Lipschitz at
    // an empty tank, so the constants are estimated away from zero.
    bc.state_box.lo = Eigen::Vector2d(0.1, 0.1);
    bc.state_box.hi = Eigen::Vector2d(cfg.tank.level_max, cfg.tank.level_max);
    bc.input_box.lo = Eigen::VectorXd::Constant(1, cfg.tank.pid.u_min);
    bc.input_box.hi = Eigen::VectorXd::Constant(1, cfg.tank.pid.u_max);
  } else {
    plant = std::make_unique<DronePlant>(cfg.drone.plant);
    const double r = cfg.drone.waypoint_range;
    bc.state_box.lo = (Eigen::VectorXd(6) << -r, -r, -1, -1, -0.5, -1).finished();
    bc.state_box.hi = (Eigen::VectorXd(6) << r, r, 1, 1, 0.5, 1).finished();
    bc.input_box.lo = Eigen::Vector2d(0.0, 0.0);
    bc.input_box.hi =
        Eigen::Vector2d(cfg.drone.plant.omega_max, cfg.drone.plant.omega_max);
    // Six state dimensions rule out the exhaustive grid; the search starts
    // from the box centre instead.
    bc.invert.initial_guess = 0.5 * (bc.state_box.lo + bc.state_box.hi);
  }

  DiagnosticsReport report =
      check_error_bound(*plant, cfg.diagnostics.ell, cfg.diagnostics.noise_level,
                        cfg.diagnostics.trials, cfg.seed, bc);
  report.system = cfg.system;
  write_diagnostics_json(report, (out / "diagnostics.json").string());
  write_diagnostics_csv(report, (out / "diagnostics.csv").string());

  std::printf("%s, ell=%d, noise %g: gamma_f_hat %.6g, alpha_ell_hat %.6g\n",
              cfg.system.c_str(), report.ell, report.noise_level,
              report.gamma_f_hat, report.alpha_ell_hat);
  if (!report.observable) {
    std::printf("system numerically unobservable at this window; "
                "no bound computed\n");
  } else {
    std::printf("bound satisfied in %.1f%% of %zu trials\n",
                100.0 * report.satisfied_fraction, report.samples.size());
  }
  std::printf("wrote %s\n", (out / "diagnostics.json").string().c_str());
}

struct SweepOpts {
  CommonOpts common;
  std::optional<int> horizon;
  TrainOverrides ov;
};

void cmd_sweep(const SweepOpts& so) {
  ExperimentConfig cfg = make_config(so.common);
  if (so.horizon) cfg.eval_horizon = *so.horizon;
  validate_config(cfg);
  cfg.seed = resolve_seed(cfg, so.common.seed);
  apply_threads(so.common.threads);
  apply_overrides(cfg.regressor_training, so.ov, so.common.verbose);
  if (so.common.verbose) cfg.autoencoder_training.verbose = true;

  const fs::path out = cfg.out_dir;
  const Dataset ds = load_dataset_from(dataset_dir(so.common, cfg));
  ensure_dir(out);
  save_config(cfg, (out / "config.json").string());

  std::vector<EvalRow> eval_rows;
  std::vector<SweepRow> sweep_rows;
  for (int ell : cfg.window_sizes) {
    const StateMapSpec spec{ell, ds.n_u, ds.n_y};
    const fs::path dir = out / ("l" + std::to_string(ell));
    ensure_dir(dir);
    TrainReport report;
    const RegressorModel model =
        train_regressor(ds, spec, cfg.regressor_training, cfg.seed, &report);
    save_model(model, (dir / "model.json").string());
    write_loss_csv(report, (dir / "train_loss.csv").string());

    const RolloutEval ev = evaluate_rollout(model, ds.test, cfg.eval_horizon);
    write_rollout_csv(ev, (dir / "eval_detail.csv").string());
    eval_rows.push_back({ell, cfg.eval_horizon, ev.mean_mse,
                         static_cast<int>(ev.per_trajectory.size())});
    std::printf("ell=%d: rollout MSE %g\n", ell, ev.mean_mse);

    const std::vector<SweepRow> rows =
        compression_sweep(model, ds, cfg.reduction_rates,
                          cfg.autoencoder_training, cfg.seed, cfg.eval_horizon);
    sweep_rows.insert(sweep_rows.end(), rows.begin(), rows.end());
    for (const auto& r : rows) {
      std::printf("  rate %.2f (latent %d): recon %g, rollout %g\n", r.rate,
                  r.latent_dim, r.recon_mse, r.rollout_mse);
    }
  }
  write_eval_csv(eval_rows, (out / "eval.csv").string());
  write_sweep_csv(sweep_rows, (out / "sweep.csv").string());
  std::printf("wrote %s and %s\n", (out / "eval.csv").string().c_str(),
              (out / "sweep.csv").string().c_str());
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"dynoid: data-driven state-space identification, model "
               "reduction, and observability diagnostics"};
  app.require_subcommand(1);

  GenOpts gen;
  auto* gen_cmd = app.add_subcommand(
      "gen-data", "simulate closed-loop trajectories and write the dataset");
  add_common(gen_cmd, gen.common, false);
  gen_cmd->add_option("--system", gen.system,
                      "plant to simulate: tank or drone2d");
  gen_cmd->callback([&] { cmd_gen_data(gen); });

  TrainOpts train;
  auto* train_cmd = app.add_subcommand(
      "train", "fit the windowed state-space model on a dataset");
  add_common(train_cmd, train.common, true);
  train_cmd->add_option("-w,--window", train.windows,
                        "window sizes to train; one model per size "
                        "(default: config window_sizes)");
  add_train_overrides(train_cmd, train.ov);
  train_cmd->callback([&] { cmd_train(train); });

  EvalOpts eval;
  auto* eval_cmd = app.add_subcommand(
      "eval", "score trained models by open-loop rollout on a split");
  add_common(eval_cmd, eval.common, true);
  eval_cmd->add_option("-w,--window", eval.windows,
                       "window sizes to evaluate (default: config "
                       "window_sizes)");
  eval_cmd->add_option("--horizon", eval.horizon, "rollout length in steps");
  eval_cmd->add_option("--split", eval.split,
                       "dataset split to score: train, valid or test");
  eval_cmd->callback([&] { cmd_eval(eval); });

  ReduceOpts reduce;
  auto* reduce_cmd = app.add_subcommand(
      "reduce", "train autoencoders over compression rates for one model");
  add_common(reduce_cmd, reduce.common, true);
  reduce_cmd->add_option("-w,--window", reduce.window,
                         "window size of the model to reduce "
                         "(default: model.json in the output directory)");
  reduce_cmd->add_option("--rates", reduce.rates,
                         "compression rates in (0,1] "
                         "(default: config reduction_rates)");
  reduce_cmd->add_option("--save-rate", reduce.save_rate,
                         "which rate's autoencoder to save as "
                         "autoencoder.json (default: the first rate)");
  reduce_cmd->add_option("--horizon", reduce.horizon,
                         "rollout length in steps");
  add_train_overrides(reduce_cmd, reduce.ov);
  reduce_cmd->callback([&] { cmd_reduce(reduce); });

  DiagnoseOpts diagnose;
  auto* diagnose_cmd = app.add_subcommand(
      "diagnose", "Monte-Carlo check of the observability error bound");
  add_common(diagnose_cmd, diagnose.common, false);
  diagnose_cmd->add_option("--system", diagnose.system,
                           "plant to analyse: tank or drone2d");
  diagnose_cmd->add_option("--ell", diagnose.ell, "observation window length");
  diagnose_cmd->add_option("--noise-level", diagnose.noise,
                           "uniform output-noise amplitude");
  diagnose_cmd->add_option("--trials", diagnose.trials,
                           "number of Monte-Carlo trials");
  diagnose_cmd->callback([&] { cmd_diagnose(diagnose); });

  SweepOpts sweep;
  auto* sweep_cmd = app.add_subcommand(
      "sweep", "train, evaluate and reduce over every window size and rate");
  add_common(sweep_cmd, sweep.common, true);
  sweep_cmd->add_option("--horizon", sweep.horizon, "rollout length in steps");
  add_train_overrides(sweep_cmd, sweep.ov);
  sweep_cmd->callback([&] { cmd_sweep(sweep); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
  return 0;
}
