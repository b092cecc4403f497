#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dynoid/datagen.hpp"
#include "dynoid/nn.hpp"
#include "dynoid/regressor.hpp"

namespace dynoid {

struct Autoencoder {
  StateMapSpec source_spec;
  int latent_dim = 1;
  MlpParams encoder;  // L -> latent_dim
  MlpParams decoder;  // latent_dim -> L
};

/// Every valid sliding window of every trajectory, as normalized state
/// columns. Count is sum over trajectories of T - ell + 1.
Eigen::MatrixXd collect_states(const std::vector<Trajectory>& split,
                               const StateMapSpec& spec,
                               const Normalization& norm);

/// States paired with the input applied at the window end and the output
/// observed there, for prediction-aware training. One column per window
/// that has a target, so T - ell per trajectory.
struct StateTargets {
  Eigen::MatrixXd z;  // L x N
  Eigen::MatrixXd u;  // n_u x N
  Eigen::MatrixXd y;  // n_y x N
};

StateTargets collect_state_targets(const std::vector<Trajectory>& split,
                                   const StateMapSpec& spec,
                                   const Normalization& norm);

/// Minimizes mean reconstruction error ||z - D(E(z))||^2 over the columns
/// of states, holding out config.valid_fraction of them for best-parameter
/// selection. With config.joint_reconstruction set and targets supplied,
/// the one-step prediction error through the frozen network h is added
/// with weight 1.
Autoencoder train_autoencoder(const Eigen::MatrixXd& states,
                              const StateMapSpec& spec, int latent_dim,
                              const TrainConfig& config, std::uint64_t seed,
                              const StateTargets* targets = nullptr,
                              const MlpParams* h = nullptr,
                              TrainReport* report = nullptr);

double reconstruction_mse(const Autoencoder& ae,
                          const Eigen::MatrixXd& states);

/// Loss and exact parameter gradients of the mean reconstruction error
/// over a batch of normalized states (one per column). Both gradient
/// structures are overwritten.
double reconstruction_loss_gradient(const Autoencoder& ae,
                                    const Eigen::MatrixXd& states,
                                    MlpGrads& encoder_grads,
                                    MlpGrads& decoder_grads);

/// Free-run rollout through the latent state: the decoded window drives
/// the predictor and the shifted decoded window is re-encoded each step.
/// Raw units in and out, as in rollout().
Eigen::MatrixXd reduced_rollout(const RegressorModel& model,
                                const Autoencoder& ae,
                                const Eigen::MatrixXd& init_u,
                                const Eigen::MatrixXd& init_y,
                                const Eigen::MatrixXd& inputs);

RolloutEval evaluate_reduced_rollout(const RegressorModel& model,
                                     const Autoencoder& ae,
                                     const std::vector<Trajectory>& split,
                                     int horizon = 100);

struct SweepRow {
  int window_size = 0;
  double rate = 0.0;
  int latent_dim = 0;
  double recon_mse = 0.0;
  double rollout_mse = 0.0;
};

/// Latent width for a compression rate: the fraction of the state removed,
/// never below one coordinate.
int latent_dim_for_rate(const StateMapSpec& spec, double rate);

/// One autoencoder per rate, trained on the train split and scored on the
/// test split (reconstruction and 100-step reduced rollout). Failures are
/// recorded as NaN rows and the sweep continues. When collect_autoencoders
/// is non-null it receives one entry per row; failed cells stay empty.
std::vector<SweepRow> compression_sweep(
    const RegressorModel& model, const Dataset& dataset,
    const std::vector<double>& rates, const TrainConfig& config,
    std::uint64_t seed, int horizon = 100,
    std::vector<std::optional<Autoencoder>>* collect_autoencoders = nullptr);

void write_sweep_csv(const std::vector<SweepRow>& rows,
                     const std::string& path);

}  // namespace dynoid
