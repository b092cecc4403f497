#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dynoid/systems.hpp"

namespace dynoid {

/// Axis-aligned sampling region.
struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  int dim() const { return static_cast<int>(lo.size()); }
  bool valid() const {
    return lo.size() == hi.size() && lo.size() > 0 &&
           (hi.array() > lo.array()).all();
  }
  Eigen::VectorXd clamp(const Eigen::VectorXd& x) const {
    return x.cwiseMax(lo).cwiseMin(hi);
  }
};

/// Applies the plant map once per input row: the i-fold iterated dynamics.
Eigen::VectorXd iterate_dynamics(const Plant& plant, const Eigen::VectorXd& x,
                                 const Eigen::MatrixXd& inputs);

/// Stacks the outputs observed along the iterated trajectory; one n_y
/// block per input row, the first taken at x itself.
Eigen::VectorXd observability_map(const Plant& plant, const Eigen::VectorXd& x,
                                  const Eigen::MatrixXd& inputs);

/// Largest sampled one-step expansion quotient; a lower bound on the true
/// Lipschitz constant. Half the pairs are drawn close together so local
/// stretching is probed as well.
double estimate_lipschitz(const Plant& plant, const Box& state_box,
                          const Box& input_box, int n_samples,
                          std::uint64_t seed);

/// Smallest sampled output-separation quotient of the ell-step
/// observability map; an upper bound on the true infimum.
double estimate_alpha(const Plant& plant, int ell, const Box& state_box,
                      const Box& input_box, int n_samples, std::uint64_t seed);

struct InvertOptions {
  int grid_points = 201;  // per axis
  int sweeps = 50;        // coordinate-descent passes after the grid stage
  std::optional<Eigen::VectorXd> initial_guess;  // required above 3 dims
};

/// Recovers the window-start state by minimizing the output residual over
/// the box, then maps it forward: returns (x at t-ell, x at t). Exhaustive
/// grid first (ties to the lowest lexicographic index), coordinate descent
/// after.
std::pair<Eigen::VectorXd, Eigen::VectorXd> invert_state(
    const Plant& plant, int ell, const Eigen::VectorXd& measured,
    const Eigen::MatrixXd& inputs, const Box& state_box,
    const InvertOptions& options = {});

struct DiagnosticsReport {
  std::string system;
  int ell = 0;
  double noise_level = 0.0;
  double gamma_f_hat = 0.0;
  double alpha_ell_hat = 0.0;
  bool observable = false;  // alpha_ell_hat > 0

  struct Sample {
    double state_error = 0.0;  // ||xhat_t - x_t||
    double noise_norm = 0.0;   // ||wbar||
    double bound = 0.0;        // 2 gamma^ell / alpha * ||wbar||
    bool satisfied = false;
  };
  std::vector<Sample> samples;
  double satisfied_fraction = 0.0;
};

struct BoundCheckConfig {
  Box state_box;
  Box input_box;
  int constant_samples = 100000;  // draws for the two constants
  InvertOptions invert;
};

/// Monte-Carlo check of the inversion error bound: simulate, perturb the
/// outputs with uniform noise of the given amplitude, invert, compare the
/// forward-mapped estimate against the true state. With a zero sampled
/// alpha the report is flagged unobservable and carries no samples.
DiagnosticsReport check_error_bound(const Plant& plant, int ell,
                                    double noise_level, int n_trials,
                                    std::uint64_t seed,
                                    const BoundCheckConfig& config);

void write_diagnostics_json(const DiagnosticsReport& report,
                            const std::string& path);
void write_diagnostics_csv(const DiagnosticsReport& report,
                           const std::string& path);
DiagnosticsReport load_diagnostics_json(const std::string& path);

struct LemmaRow {
  int i = 0;
  double max_quotient = 0.0;  // sampled Lipschitz quotient of F_i
  double gamma_pow = 0.0;     // gamma_f_hat^i over the same samples
};

/// Sampled check that iterated dynamics expand no faster than gamma^i,
/// with gamma taken as the max single-step quotient over the same chains.
std::vector<LemmaRow> check_lemma1(const Plant& plant, int i_max,
                                   const Box& state_box, const Box& input_box,
                                   int n_samples, std::uint64_t seed);

}  // namespace dynoid
