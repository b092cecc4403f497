#pragma once

#include <string>

#include "dynoid/nn.hpp"
#include "dynoid/reduction.hpp"
#include "dynoid/regressor.hpp"

namespace dynoid {

/// Versioned JSON checkpoints. Weights are stored flat, row-major, one
/// array per layer. Loaders validate shapes, finiteness, and the format
/// version before returning anything.

void save_mlp(const MlpParams& params, const std::string& path);
MlpParams load_mlp(const std::string& path);

void save_model(const RegressorModel& model, const std::string& path);
RegressorModel load_model(const std::string& path);

void save_autoencoder(const Autoencoder& ae, const std::string& path);
Autoencoder load_autoencoder(const std::string& path);

}  // namespace dynoid
