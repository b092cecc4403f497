#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dynoid/datagen.hpp"
#include "dynoid/nn.hpp"

namespace dynoid {

struct DiagnosticsConfig {
  int ell = 5;
  double noise_level = 0.01;
  int trials = 200;
  int constant_samples = 100000;
  int grid_points = 201;
  int sweeps = 50;
};

/// Everything one experiment needs, serializable as a single JSON document.
/// A config file may specify any subset of keys; the rest keep defaults.
struct ExperimentConfig {
  std::string system = "tank";  // tank | drone2d
  std::uint64_t seed = 0;
  std::vector<int> window_sizes = {5, 10, 15, 20, 25, 30};
  std::string out_dir = "out";
  int eval_horizon = 100;
  std::vector<double> reduction_rates = {0.15, 0.30, 0.45, 0.60, 0.75, 0.90};

  TankDatasetConfig tank;
  DroneDatasetConfig drone;
  TrainConfig regressor_training;
  TrainConfig autoencoder_training;
  DiagnosticsConfig diagnostics;
};

/// Defaults sized for overnight-quality runs on a workstation: regressor
/// 3x256 hidden, autoencoder 2x512 with 500 epochs.
ExperimentConfig default_config();

void validate_config(const ExperimentConfig& config);

/// Defaults overridden by whatever keys the file provides. Unknown keys
/// are rejected so typos surface instead of silently reverting to
/// defaults.
ExperimentConfig load_config(const std::string& path);

void save_config(const ExperimentConfig& config, const std::string& path);

/// Seed precedence: explicit flag, then the DYNOID_SEED environment
/// variable, then the config value.
std::uint64_t resolve_seed(const ExperimentConfig& config,
                           std::optional<std::uint64_t> flag_seed);

}  // namespace dynoid
