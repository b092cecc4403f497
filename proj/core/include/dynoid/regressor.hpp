#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dynoid/datagen.hpp"
#include "dynoid/nn.hpp"

namespace dynoid {

/// Sliding-window state layout: z stacks the last ell (u, y) pairs, oldest
/// first, each block n_u + n_y long.
struct StateMapSpec {
  int ell = 1;
  int n_u = 1;
  int n_y = 1;

  int block_dim() const { return n_u + n_y; }
  int state_dim() const { return ell * block_dim(); }
  bool valid() const { return ell >= 1 && n_u >= 1 && n_y >= 1; }
};

/// Explicit matrices of the shift update z' = Abar z + Bbar u + Sbar y.
struct CanonicalMatrices {
  Eigen::MatrixXd Abar;  // L x L
  Eigen::MatrixXd Bbar;  // L x n_u
  Eigen::MatrixXd Sbar;  // L x n_y
};

CanonicalMatrices canonical_matrices(const StateMapSpec& spec);

/// Stacks ell (u, y) rows, oldest first, into a state vector.
/// u_window is ell x n_u, y_window is ell x n_y.
Eigen::VectorXd build_state(const StateMapSpec& spec,
                            const Eigen::MatrixXd& u_window,
                            const Eigen::MatrixXd& y_window);

/// Drop-oldest-append equivalent of the canonical matrix update.
Eigen::VectorXd shift_update(const StateMapSpec& spec,
                             const Eigen::VectorXd& z,
                             const Eigen::VectorXd& u,
                             const Eigen::VectorXd& y);

/// Column-batched shift update; z is L x B, u is n_u x B, y is n_y x B.
Eigen::MatrixXd shift_update_batch(const StateMapSpec& spec,
                                   const Eigen::MatrixXd& z,
                                   const Eigen::MatrixXd& u,
                                   const Eigen::MatrixXd& y);

struct RegressorModel {
  StateMapSpec spec;
  Normalization normalization;
  MlpParams h;  // input L + n_u, output n_y
};

/// Weighted output-error loss of one trajectory, in the model's normalized
/// coordinates. The state is initialized from the first ell measured pairs
/// and then propagated with the model's own predictions. With the default
/// weights the first regression step counts ten-fold; a custom weight vector
/// must have one entry per regression step (T - ell of them).
double regression_loss(const RegressorModel& model, const Trajectory& traj,
                       const Eigen::VectorXd* weights = nullptr);

struct TrainReport {
  std::vector<double> train_loss;             // one entry per epoch
  std::vector<std::pair<int, double>> valid_loss;  // (epoch, loss)
  int best_epoch = -1;
  double best_valid_loss = 0.0;
};

RegressorModel train_regressor(const Dataset& dataset, const StateMapSpec& spec,
                               const TrainConfig& config, std::uint64_t seed,
                               TrainReport* report = nullptr);

/// Loss and exact parameter gradient of regression_loss (default weights)
/// over one trajectory. grads is overwritten. chunk_len 0 backpropagates
/// through the whole recursion; a positive value truncates like training.
double regression_loss_gradient(const RegressorModel& model,
                                const Trajectory& traj, MlpGrads& grads,
                                int chunk_len = 0);

/// Free-run recursion with an arbitrary output map, in the caller's
/// coordinates. init_u/init_y are the ell burn-in rows (oldest first),
/// inputs has one row per prediction step.
Eigen::MatrixXd rollout_core(
    const StateMapSpec& spec,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd& z,
                                        const Eigen::VectorXd& u)>& h,
    const Eigen::MatrixXd& init_u, const Eigen::MatrixXd& init_y,
    const Eigen::MatrixXd& inputs);

/// Free-run rollout of the trained model. Raw (denormalized) units in and
/// out; measured outputs are consumed only through the burn-in window.
Eigen::MatrixXd rollout(const RegressorModel& model,
                        const Eigen::MatrixXd& init_u,
                        const Eigen::MatrixXd& init_y,
                        const Eigen::MatrixXd& inputs);

struct RolloutEval {
  struct Entry {
    std::string trajectory_id;
    double mse = 0.0;
  };
  int window_size = 0;
  int horizon = 0;
  std::vector<Entry> per_trajectory;
  std::vector<std::string> skipped;  // too short for ell + horizon
  double mean_mse = 0.0;
};

/// One rollout per trajectory, starting right after the burn-in window,
/// scored against measured outputs in denormalized units.
RolloutEval evaluate_rollout(const RegressorModel& model,
                             const std::vector<Trajectory>& split,
                             int horizon = 100);

void write_rollout_csv(const RolloutEval& eval, const std::string& path);

}  // namespace dynoid
