// Acceptance gate: nine numbered checks with pinned tolerances, one
// verdict line each. Expensive artifacts (datasets, trained models) are
// cached in the workdir so related criteria share them; every criterion
// also rebuilds what it needs when run standalone.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "cli.hpp"
#include "dynoid/checkpoint.hpp"
#include "dynoid/config.hpp"
#include "dynoid/datagen.hpp"
#include "dynoid/diagnostics.hpp"
#include "dynoid/errors.hpp"
#include "dynoid/nn.hpp"
#include "dynoid/reduction.hpp"
#include "dynoid/regressor.hpp"
#include "dynoid/systems.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace dynoid;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, ...) {
  va_list args;
  va_start(args, format);
  char buf[512];
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

// --- cached artifacts -------------------------------------------------------

Dataset cached_tank_dataset(const fs::path& work, bool noiseless) {
  const fs::path dir = work / (noiseless ? "noiseless" : "noisy");
  const std::string header = (dir / "header.json").string();
  const std::string data = (dir / "dataset.jsonl").string();
  if (fs::exists(header) && fs::exists(data)) return load_dataset(header, data);
  TankDatasetConfig cfg;  // default 60/20/20 trajectories of 200 steps
  if (noiseless) cfg.noise_sigma = Eigen::VectorXd::Zero(1);
  const Dataset ds = generate_tank_dataset(cfg, 42);
  fs::create_directories(dir);
  save_dataset(ds, header, data);
  return ds;
}

TrainConfig shared_regressor_config(int epochs) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.lr = 1e-3;
  cfg.hidden_dims = {64, 64};
  return cfg;
}

RegressorModel cached_tank_model(const fs::path& work, const Dataset& ds,
                                 const std::string& tag, int ell, int epochs) {
  const fs::path path = work / tag / ("l" + std::to_string(ell)) / "model.json";
  if (fs::exists(path)) return load_model(path.string());
  const RegressorModel model = train_regressor(
      ds, StateMapSpec{ell, 1, 1}, shared_regressor_config(epochs), 7);
  fs::create_directories(path.parent_path());
  save_model(model, path.string());
  return model;
}

TrainConfig linear_autoencoder_config(int epochs, double lr) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.lr = lr;
  cfg.hidden_dims = {};
  cfg.activation = Activation::kIdentity;
  return cfg;
}

// --- criteria ---------------------------------------------------------------

// Shift-model equivalence: matrix update vs sliding-window construction,
// exact, on 1000 random cases per (ell, n_u, n_y) in {1..4}x{1..3}x{1..3}.
Verdict criterion_1(const fs::path&) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unit(-2.0, 2.0);
  int specs = 0;
  for (int ell = 1; ell <= 4; ++ell) {
    for (int n_u = 1; n_u <= 3; ++n_u) {
      for (int n_y = 1; n_y <= 3; ++n_y) {
        const StateMapSpec spec{ell, n_u, n_y};
        const CanonicalMatrices m = canonical_matrices(spec);
        ++specs;
        for (int trial = 0; trial < 1000; ++trial) {
          Eigen::MatrixXd u_win(ell, n_u), y_win(ell, n_y);
          for (Eigen::Index i = 0; i < u_win.size(); ++i)
            u_win.data()[i] = unit(rng);
          for (Eigen::Index i = 0; i < y_win.size(); ++i)
            y_win.data()[i] = unit(rng);
          Eigen::VectorXd u_new(n_u), y_new(n_y);
          for (int i = 0; i < n_u; ++i) u_new(i) = unit(rng);
          for (int i = 0; i < n_y; ++i) y_new(i) = unit(rng);

          const Eigen::VectorXd z = build_state(spec, u_win, y_win);
          const Eigen::VectorXd via_matrix =
              m.Abar * z + m.Bbar * u_new + m.Sbar * y_new;
          const Eigen::VectorXd via_shift = shift_update(spec, z, u_new, y_new);

          Eigen::MatrixXd u_next(ell, n_u), y_next(ell, n_y);
          if (ell > 1) {
            u_next.topRows(ell - 1) = u_win.bottomRows(ell - 1);
            y_next.topRows(ell - 1) = y_win.bottomRows(ell - 1);
          }
          u_next.row(ell - 1) = u_new.transpose();
          y_next.row(ell - 1) = y_new.transpose();
          const Eigen::VectorXd via_window = build_state(spec, u_next, y_next);

          if ((via_matrix - via_window).cwiseAbs().maxCoeff() != 0.0 ||
              (via_shift - via_window).cwiseAbs().maxCoeff() != 0.0) {
            return {false, fmt("mismatch at ell=%d n_u=%d n_y=%d trial %d",
                               ell, n_u, n_y, trial)};
          }
        }
      }
    }
  }
  return {true, fmt("matrix, shift, and window updates identical on %d specs "
                    "x 1000 cases", specs)};
}

// Gradient correctness on small nets: regressor loss through a 20-step
// rollout and autoencoder reconstruction loss vs central differences.
Verdict criterion_2(const fs::path&) {
  TankDatasetConfig dcfg;
  dcfg.n_train = 2;
  dcfg.n_valid = 1;
  dcfg.n_test = 1;
  dcfg.horizon = 60;
  dcfg.noise_sigma = Eigen::VectorXd::Zero(1);
  const Dataset ds = generate_tank_dataset(dcfg, 29);

  RegressorModel model;
  model.spec = {2, 1, 1};
  model.normalization = ds.normalization;
  model.h = mlp_init({model.spec.state_dim() + 1, 8, 1}, Activation::kTanh, 8);
  Trajectory traj = ds.train[0];
  traj.inputs.conservativeResize(22, 1);   // 20 regression steps
  traj.outputs.conservativeResize(22, 1);

  MlpGrads grads = make_zero_grads(model.h);
  (void)regression_loss_gradient(model, traj, grads, 0);
  const double reg_err = testutil::max_gradient_rel_error(
      model.h, grads, [&] { return regression_loss(model, traj); });

  Autoencoder ae;
  ae.source_spec = {2, 1, 1};
  ae.latent_dim = 2;
  ae.encoder = mlp_init({4, 6, 2}, Activation::kTanh, 5);
  ae.decoder = mlp_init({2, 6, 4}, Activation::kTanh, 6);
  Eigen::MatrixXd states(4, 10);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (Eigen::Index i = 0; i < states.size(); ++i) states.data()[i] = unit(rng);
  MlpGrads ge = make_zero_grads(ae.encoder);
  MlpGrads gd = make_zero_grads(ae.decoder);
  (void)reconstruction_loss_gradient(ae, states, ge, gd);
  const auto recon = [&] { return reconstruction_mse(ae, states); };
  const double enc_err = testutil::max_gradient_rel_error(ae.encoder, ge, recon);
  const double dec_err = testutil::max_gradient_rel_error(ae.decoder, gd, recon);

  const bool pass = reg_err < 1e-4 && enc_err < 1e-4 && dec_err < 1e-4;
  return {pass,
          fmt("max rel error vs central differences: regressor %.2e (%d "
              "params), encoder %.2e, decoder %.2e (tolerance 1e-4)",
              reg_err, model.h.parameter_count(), enc_err, dec_err)};
}

// Plant fixed points to 1e-10, checked inside a 1 s budget.
Verdict criterion_3(const fs::path&) {
  const auto start = std::chrono::steady_clock::now();

  const TankParams tp;
  const double u = 1.0;
  const double x1e = std::pow(tp.k2 * u / tp.k1, 2);
  const double x2e = std::pow(tp.k3 * std::sqrt(x1e) / tp.k4, 2);
  const Eigen::Vector2d xe(x1e, x2e);
  const double tank_resid = (tank_step(xe, u, tp) - xe).cwiseAbs().maxCoeff();

  const DroneParams dp;
  const double hover = drone_hover_speed(dp);
  const DroneState rest = DroneState::Zero();
  const double drone_resid =
      (drone_step(rest, Eigen::Vector2d(hover, hover), dp) - rest)
          .cwiseAbs()
          .maxCoeff();

  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  const bool pass = tank_resid <= 1e-10 && drone_resid <= 1e-10 && elapsed < 1.0;
  return {pass, fmt("tank residual %.2e, drone hover residual %.2e "
                    "(tolerance 1e-10), %.3f s",
                    tank_resid, drone_resid, elapsed)};
}

// Noiseless tank identification at ell = 10: mean 100-step rollout MSE on
// the test split below 1e-2.
Verdict criterion_4(const fs::path& work) {
  const Dataset ds = cached_tank_dataset(work, true);
  const RegressorModel model =
      cached_tank_model(work, ds, "noiseless", 10, 1500);
  const RolloutEval eval = evaluate_rollout(model, ds.test, 100);
  return {eval.mean_mse < 1e-2,
          fmt("mean 100-step rollout MSE %.4e over %zu test trajectories "
              "(target < 1e-2)",
              eval.mean_mse, eval.per_trajectory.size())};
}

// Window-size trend on noisy data: ell = 5 strictly worse than ell = 20
// under a shared training budget.
Verdict criterion_5(const fs::path& work) {
  const Dataset ds = cached_tank_dataset(work, false);
  const RegressorModel m5 = cached_tank_model(work, ds, "noisy", 5, 300);
  const RegressorModel m20 = cached_tank_model(work, ds, "noisy", 20, 300);
  const double mse5 = evaluate_rollout(m5, ds.test, 100).mean_mse;
  const double mse20 = evaluate_rollout(m20, ds.test, 100).mean_mse;
  return {mse5 > mse20,
          fmt("100-step rollout MSE: ell=5 %.4e vs ell=20 %.4e "
              "(shared 300-epoch budget, strict > required)",
              mse5, mse20)};
}

// Observability bound at ell = 5: every noisy trial inside the bound,
// noiseless trials recover the true state within 1e-2.
Verdict criterion_6(const fs::path&) {
  const TankPlant tank;
  BoundCheckConfig cfg;
  cfg.state_box.lo = Eigen::Vector2d(0.1, 0.1);
  cfg.state_box.hi = Eigen::Vector2d(5.0, 5.0);
  cfg.input_box.lo = Eigen::VectorXd::Zero(1);
  cfg.input_box.hi = Eigen::VectorXd::Constant(1, 5.0);

  const DiagnosticsReport noisy = check_error_bound(tank, 5, 0.01, 200, 11, cfg);
  const DiagnosticsReport clean = check_error_bound(tank, 5, 0.0, 200, 11, cfg);
  double worst_recovery = 0.0;
  for (const auto& s : clean.samples)
    worst_recovery = std::max(worst_recovery, s.state_error);

  const bool pass = noisy.observable &&
                    noisy.samples.size() == 200 &&
                    noisy.satisfied_fraction == 1.0 &&
                    clean.samples.size() == 200 && worst_recovery <= 1e-2;
  return {pass,
          fmt("bound satisfied in %.1f%% of 200 noisy trials (gamma %.3f, "
              "alpha %.3f); worst noiseless recovery error %.2e (target "
              "100%% and <= 1e-2)",
              100.0 * noisy.satisfied_fraction, noisy.gamma_f_hat,
              noisy.alpha_ell_hat, worst_recovery)};
}

// Autoencoder capacity: full-width latent reconstructs below 1e-6, and
// reconstruction error is non-increasing over four latent widths.
Verdict criterion_7(const fs::path& work) {
  const Dataset ds = cached_tank_dataset(work, false);
  const StateMapSpec spec{5, 1, 1};  // L = 10
  const Eigen::MatrixXd states =
      collect_states(ds.train, spec, ds.normalization);

  // A linear map suffices at latent = L, but Adam's tail on the bilinear
  // objective is long: tens of thousands of full-batch steps to hit 1e-6.
  const Eigen::MatrixXd subset =
      states.leftCols(std::min<Eigen::Index>(states.cols(), 500));
  TrainConfig capacity_cfg = linear_autoencoder_config(60000, 3e-3);
  capacity_cfg.batch_size = 16;  // autoencoder batches are 32x this
  capacity_cfg.valid_every = 500;
  const Autoencoder full =
      train_autoencoder(subset, spec, spec.state_dim(), capacity_cfg, 7);
  const double full_mse = reconstruction_mse(full, subset);

  TrainConfig level_cfg = linear_autoencoder_config(500, 3e-3);
  level_cfg.batch_size = 16;
  level_cfg.valid_every = 100;
  std::vector<double> errors;
  std::string levels;
  for (const int latent : {2, 4, 7, 10}) {
    const Autoencoder ae = train_autoencoder(
        subset, spec, latent, level_cfg,
        7 + static_cast<std::uint64_t>(latent));
    errors.push_back(reconstruction_mse(ae, subset));
    levels += fmt(" %d:%.2e", latent, errors.back());
  }
  bool monotone = true;
  for (std::size_t i = 1; i < errors.size(); ++i)
    monotone = monotone && errors[i] <= errors[i - 1];

  const bool pass = full_mse < 1e-6 && monotone;
  return {pass, fmt("latent=L reconstruction MSE %.2e (target < 1e-6); "
                    "per-latent MSE%s %s",
                    full_mse, levels.c_str(),
                    monotone ? "non-increasing" : "NOT monotone")};
}

// Compression robustness: 60% compression at ell = 20 keeps the 100-step
// rollout within 2x of the unreduced model.
Verdict criterion_8(const fs::path& work) {
  const Dataset ds = cached_tank_dataset(work, false);
  const RegressorModel model = cached_tank_model(work, ds, "noisy", 20, 300);
  const double unreduced = evaluate_rollout(model, ds.test, 100).mean_mse;

  const TrainConfig cfg = linear_autoencoder_config(500, 3e-3);
  const std::vector<SweepRow> rows =
      compression_sweep(model, ds, {0.6}, cfg, 7, 100);
  if (rows.size() != 1 || !std::isfinite(rows[0].rollout_mse))
    return {false, "compression sweep failed to produce the 60% cell"};

  const double ratio = rows[0].rollout_mse / unreduced;
  return {ratio <= 2.0,
          fmt("latent %d of 40: reduced rollout MSE %.4e vs unreduced %.4e, "
              "ratio %.2f (target <= 2)",
              rows[0].latent_dim, rows[0].rollout_mse, unreduced, ratio)};
}

// Determinism: the pipeline repeated with one seed produces bit-identical
// artifacts.
Verdict criterion_9(const fs::path& work) {
  const fs::path cfg_path = work / "det_config.json";
  fs::create_directories(work);
  {
    std::ofstream out(cfg_path);
    out << R"({
      "window_sizes": [3],
      "eval_horizon": 30,
      "tank": {"n_train": 4, "n_valid": 2, "n_test": 2, "horizon": 60},
      "regressor_training": {"epochs": 5, "hidden_dims": [16], "batch_size": 4}
    })";
  }
  auto run = [&](const std::string& tag) {
    const fs::path out = work / tag;
    fs::remove_all(out);
    const std::string cfg = cfg_path.string();
    const std::string dir = out.string();
    const std::vector<std::vector<std::string>> commands = {
        {"dynoid", "gen-data", "--config", cfg, "-o", dir, "--seed", "21"},
        {"dynoid", "train", "--config", cfg, "-o", dir, "--seed", "21"},
        {"dynoid", "eval", "--config", cfg, "-o", dir},
    };
    for (const auto& command : commands) {
      std::vector<const char*> argv;
      for (const std::string& a : command) argv.push_back(a.c_str());
      if (run_cli(static_cast<int>(argv.size()), argv.data()) != 0)
        throw NumericError("pipeline command failed: " + command[1]);
    }
  };
  run("det_a");
  run("det_b");

  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };
  const bool eval_same =
      slurp(work / "det_a" / "eval.csv") == slurp(work / "det_b" / "eval.csv");
  const bool model_same = slurp(work / "det_a" / "model.json") ==
                          slurp(work / "det_b" / "model.json");
  const bool nonempty = !slurp(work / "det_a" / "eval.csv").empty();
  return {eval_same && model_same && nonempty,
          fmt("eval.csv %s, model.json %s across two seeded runs",
              eval_same ? "identical" : "DIFFERS",
              model_same ? "identical" : "DIFFERS")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  int criterion = 0;
  std::string workdir =
      (fs::temp_directory_path() / "dynoid_acceptance").string();
  app.add_option("--criterion", criterion, "criterion number, 0 for all")
      ->check(CLI::Range(0, 9));
  app.add_option("--workdir", workdir, "cache directory for shared artifacts");
  CLI11_PARSE(app, argc, argv);

  using CriterionFn = Verdict (*)(const fs::path&);
  const CriterionFn criteria[] = {criterion_1, criterion_2, criterion_3,
                                  criterion_4, criterion_5, criterion_6,
                                  criterion_7, criterion_8, criterion_9};

  const fs::path work(workdir);
  fs::create_directories(work);
  bool all_pass = true;
  for (int n = 1; n <= 9; ++n) {
    if (criterion != 0 && criterion != n) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict verdict;
    try {
      verdict = criteria[n - 1](work);
    } catch (const std::exception& e) {
      verdict = {false, std::string("exception: ") + e.what()};
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    std::printf("criterion %d: %s - %s [%.1f s]\n", n,
                verdict.pass ? "PASS" : "FAIL", verdict.detail.c_str(),
                elapsed);
    std::fflush(stdout);
    all_pass = all_pass && verdict.pass;
  }
  return all_pass ? 0 : 1;
}
