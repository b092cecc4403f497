#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dynoid/systems.hpp"

namespace dynoid {

/// One closed-loop simulation run. inputs is T x n_u, outputs T x n_y,
/// true_states (simulated plants only) T x n_x; rows are time steps.
struct Trajectory {
  std::string id;
  double dt = 1.0;
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd outputs;
  std::optional<Eigen::MatrixXd> true_states;

  int length() const { return static_cast<int>(inputs.rows()); }
};

/// Per-channel statistics computed on the train split.
struct Normalization {
  Eigen::VectorXd u_mean, u_std;
  Eigen::VectorXd y_mean, y_std;

  Eigen::VectorXd normalize_u(const Eigen::VectorXd& u) const;
  Eigen::VectorXd normalize_y(const Eigen::VectorXd& y) const;
  Eigen::VectorXd denormalize_y(const Eigen::VectorXd& y) const;
  Eigen::MatrixXd normalize_u_rows(const Eigen::MatrixXd& u) const;
  Eigen::MatrixXd normalize_y_rows(const Eigen::MatrixXd& y) const;
  Eigen::MatrixXd denormalize_y_rows(const Eigen::MatrixXd& y) const;
};

struct Dataset {
  std::string system;
  int n_u = 0;
  int n_y = 0;
  double dt = 1.0;
  std::vector<Trajectory> train, valid, test;
  Normalization normalization;

  const std::vector<Trajectory>& split(const std::string& name) const;
};

/// Computes per-channel mean and standard deviation over every time step
/// of the train split. Standard deviations are floored at 1e-8.
Normalization compute_normalization(const std::vector<Trajectory>& train);

struct TankDatasetConfig {
  TankParams plant;
  PidGains pid;
  double level_max = 5.0;           // waypoint range [0, level_max]
  int waypoint_count = 5;
  int horizon = 200;
  int n_train = 60, n_valid = 20, n_test = 20;
  Eigen::VectorXd noise_sigma = Eigen::VectorXd::Constant(1, 0.05);
};

struct DroneDatasetConfig {
  DroneParams plant;
  LqTrackerConfig tracker;
  double waypoint_range = 2.0;      // waypoints in [-range, range]^2
  int waypoint_min = 5, waypoint_max = 10;
  int horizon = 600;
  int n_train = 500, n_valid = 20, n_test = 20;
  Eigen::VectorXd noise_sigma =
      (Eigen::VectorXd(3) << 0.01, 0.01, 0.01).finished();
};

/// Closed-loop tank data: per trajectory, waypoints uniform in
/// [0, level_max] splined over the horizon and tracked by PID, with
/// observation noise. Deterministic per seed.
Dataset generate_tank_dataset(const TankDatasetConfig& cfg, std::uint64_t seed);

/// Closed-loop drone data: 5..10 waypoints in [-2,2]^2 splined over the
/// horizon and tracked by the LQ tracker. A trajectory whose controller
/// diverges is re-sampled with a fresh derived seed.
Dataset generate_drone_dataset(const DroneDatasetConfig& cfg,
                               std::uint64_t seed);

/// Writes header_path (JSON) and data_path (JSON lines, one trajectory
/// per line). Lossless for all fields including normalization.
void save_dataset(const Dataset& ds, const std::string& header_path,
                  const std::string& data_path);

Dataset load_dataset(const std::string& header_path,
                     const std::string& data_path);

}  // namespace dynoid
