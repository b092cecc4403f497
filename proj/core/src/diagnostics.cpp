#include "dynoid/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "csv_util.hpp"
#include "dynoid/errors.hpp"
#include "json_util.hpp"
#include "seed_util.hpp"

namespace dynoid {

namespace {

constexpr int kReportFormatVersion = 1;

void check_plant_boxes(const Plant& plant, const Box& state_box,
                       const Box& input_box) {
  if (!state_box.valid() || state_box.dim() != plant.state_dim()) {
    throw UsageError("state box does not match the plant");
  }
  if (!input_box.valid() || input_box.dim() != plant.input_dim()) {
    throw UsageError("input box does not match the plant");
  }
}

Eigen::VectorXd sample_box(const Box& box, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd x(box.dim());
  for (int i = 0; i < box.dim(); ++i) {
    x(i) = box.lo(i) + (box.hi(i) - box.lo(i)) * unit(rng);
  }
  return x;
}

Eigen::MatrixXd sample_inputs(const Box& box, int rows, std::mt19937_64& rng) {
  Eigen::MatrixXd u(rows, box.dim());
  for (int r = 0; r < rows; ++r) u.row(r) = sample_box(box, rng).transpose();
  return u;
}

/// Every other pair is drawn at log-uniform distance from its partner so
/// the quotients probe local stretching, not only far-apart geometry.
Eigen::VectorXd sample_partner(const Box& box, const Eigen::VectorXd& x,
                               bool close, std::mt19937_64& rng) {
  if (!close) return sample_box(box, rng);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> expo(-7.0, -0.3);
  Eigen::VectorXd dir(box.dim());
  for (int i = 0; i < box.dim(); ++i) dir(i) = gauss(rng);
  const double norm = dir.norm();
  if (norm == 0.0) return sample_box(box, rng);
  const double radius =
      (box.hi - box.lo).norm() * std::pow(10.0, expo(rng));
  return box.clamp(x + (radius / norm) * dir);
}

}  // namespace

Eigen::VectorXd iterate_dynamics(const Plant& plant, const Eigen::VectorXd& x,
                                 const Eigen::MatrixXd& inputs) {
  if (inputs.rows() < 1) throw UsageError("need at least one input row");
  if (inputs.cols() != plant.input_dim() || x.size() != plant.state_dim()) {
    throw UsageError("iterate_dynamics dimension mismatch");
  }
  Eigen::VectorXd state = x;
  for (Eigen::Index k = 0; k < inputs.rows(); ++k) {
    state = plant.step(state, inputs.row(k).transpose());
  }
  return state;
}

Eigen::VectorXd observability_map(const Plant& plant, const Eigen::VectorXd& x,
                                  const Eigen::MatrixXd& inputs) {
  if (inputs.rows() < 1) throw UsageError("need at least one input row");
  if (inputs.cols() != plant.input_dim() || x.size() != plant.state_dim()) {
    throw UsageError("observability_map dimension mismatch");
  }
  const int n_y = plant.output_dim();
  Eigen::VectorXd out(inputs.rows() * n_y);
  Eigen::VectorXd state = x;
  for (Eigen::Index k = 0; k < inputs.rows(); ++k) {
    const Eigen::VectorXd u = inputs.row(k).transpose();
    out.segment(k * n_y, n_y) = plant.observe(state, u);
    state = plant.step(state, u);
  }
  return out;
}

double estimate_lipschitz(const Plant& plant, const Box& state_box,
                          const Box& input_box, int n_samples,
                          std::uint64_t seed) {
  check_plant_boxes(plant, state_box, input_box);
  if (n_samples < 1) throw UsageError("need at least one sample");
  std::mt19937_64 rng(seed);
  double gamma = 0.0;
  for (int k = 0; k < n_samples; ++k) {
    const Eigen::VectorXd x = sample_box(state_box, rng);
    const Eigen::VectorXd xp = sample_partner(state_box, x, k % 2 == 1, rng);
    const Eigen::VectorXd u = sample_box(input_box, rng);
    const double dist = (x - xp).norm();
    if (dist == 0.0) continue;
    const double quotient =
        (plant.step(x, u) - plant.step(xp, u)).norm() / dist;
    gamma = std::max(gamma, quotient);
  }
  return gamma;
}

double estimate_alpha(const Plant& plant, int ell, const Box& state_box,
                      const Box& input_box, int n_samples,
                      std::uint64_t seed) {
  check_plant_boxes(plant, state_box, input_box);
  if (ell < 1) throw UsageError("ell must be at least 1");
  if (n_samples < 1) throw UsageError("need at least one sample");
  std::mt19937_64 rng(seed);
  double alpha = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n_samples; ++k) {
    const Eigen::VectorXd x = sample_box(state_box, rng);
    const Eigen::VectorXd xp = sample_partner(state_box, x, k % 2 == 1, rng);
    const Eigen::MatrixXd u = sample_inputs(input_box, ell, rng);
    const double dist = (x - xp).norm();
    if (dist == 0.0) continue;
    const double quotient = (observability_map(plant, x, u) -
                             observability_map(plant, xp, u))
                                .norm() /
                            dist;
    alpha = std::min(alpha, quotient);
  }
  return std::isfinite(alpha) ? alpha : 0.0;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> invert_state(
    const Plant& plant, int ell, const Eigen::VectorXd& measured,
    const Eigen::MatrixXd& inputs, const Box& state_box,
    const InvertOptions& options) {
  const int n_x = plant.state_dim();
  if (!state_box.valid() || state_box.dim() != n_x) {
    throw UsageError("state box does not match the plant");
  }
  if (inputs.rows() != ell || inputs.cols() != plant.input_dim()) {
    throw UsageError("expected ell input rows");
  }
  if (measured.size() != static_cast<Eigen::Index>(ell) * plant.output_dim()) {
    throw UsageError("expected ell output blocks");
  }
  if (options.grid_points < 2) throw UsageError("grid needs at least 2 points");

  auto residual = [&](const Eigen::VectorXd& x) {
    return (measured - observability_map(plant, x, inputs)).norm();
  };

  Eigen::VectorXd best;
  double best_r = std::numeric_limits<double>::infinity();
  const Eigen::VectorXd spacing =
      (state_box.hi - state_box.lo) / (options.grid_points - 1);

  if (options.initial_guess) {
    if (options.initial_guess->size() != n_x) {
      throw UsageError("initial guess dimension mismatch");
    }
    best = state_box.clamp(*options.initial_guess);
    best_r = residual(best);
  } else {
    if (n_x > 3) {
      throw UsageError(
          "grid inversion handles at most 3 state dims; supply an initial "
          "guess for larger plants");
    }
    // Lexicographic odometer over grid indices; strict improvement keeps
    // the lowest-index minimizer on ties.
    std::vector<int> idx(n_x, 0);
    Eigen::VectorXd x(n_x);
    while (true) {
      for (int d = 0; d < n_x; ++d) {
        x(d) = state_box.lo(d) + idx[d] * spacing(d);
      }
      const double r = residual(x);
      if (r < best_r) {
        best_r = r;
        best = x;
      }
      int d = n_x - 1;
      while (d >= 0 && ++idx[d] == options.grid_points) {
        idx[d] = 0;
        --d;
      }
      if (d < 0) break;
    }
  }

  // Pattern search: per axis try one step either way, shrink on a full
  // sweep without improvement.
  Eigen::VectorXd step = spacing;
  for (int sweep = 0; sweep < options.sweeps; ++sweep) {
    bool improved = false;
    for (int d = 0; d < n_x; ++d) {
      for (const double sign : {1.0, -1.0}) {
        Eigen::VectorXd cand = best;
        cand(d) = std::min(state_box.hi(d),
                           std::max(state_box.lo(d), best(d) + sign * step(d)));
        if (cand(d) == best(d)) continue;
        const double r = residual(cand);
        if (r < best_r) {
          best_r = r;
          best = cand;
          improved = true;
          break;
        }
      }
    }
    if (!improved) step *= 0.5;
  }

  return {best, iterate_dynamics(plant, best, inputs)};
}

DiagnosticsReport check_error_bound(const Plant& plant, int ell,
                                    double noise_level, int n_trials,
                                    std::uint64_t seed,
                                    const BoundCheckConfig& config) {
  check_plant_boxes(plant, config.state_box, config.input_box);
  if (ell < 1) throw UsageError("ell must be at least 1");
  if (n_trials < 1) throw UsageError("need at least one trial");
  if (noise_level < 0) throw UsageError("noise level must be nonnegative");

  DiagnosticsReport report;
  report.ell = ell;
  report.noise_level = noise_level;
  report.gamma_f_hat =
      estimate_lipschitz(plant, config.state_box, config.input_box,
                         config.constant_samples, detail::mix_seed(seed, 1));
  report.alpha_ell_hat =
      estimate_alpha(plant, ell, config.state_box, config.input_box,
                     config.constant_samples, detail::mix_seed(seed, 2));
  report.observable = report.alpha_ell_hat > 0.0;
  if (!report.observable) return report;

  const double bound_factor =
      2.0 * std::pow(report.gamma_f_hat, ell) / report.alpha_ell_hat;
  const Eigen::Index n_meas =
      static_cast<Eigen::Index>(ell) * plant.output_dim();
  int satisfied = 0;
  for (int trial = 0; trial < n_trials; ++trial) {
    std::mt19937_64 rng(detail::mix_seed(seed, 100 + trial));
    const Eigen::VectorXd x0 = sample_box(config.state_box, rng);
    const Eigen::MatrixXd inputs = sample_inputs(config.input_box, ell, rng);
    Eigen::VectorXd noise = Eigen::VectorXd::Zero(n_meas);
    if (noise_level > 0.0) {
      std::uniform_real_distribution<double> dist(-noise_level, noise_level);
      for (Eigen::Index i = 0; i < n_meas; ++i) noise(i) = dist(rng);
    }
    const Eigen::VectorXd measured =
        observability_map(plant, x0, inputs) + noise;
    const auto [xhat0, xhat_t] =
        invert_state(plant, ell, measured, inputs, config.state_box,
                     config.invert);
    const Eigen::VectorXd x_t = iterate_dynamics(plant, x0, inputs);

    DiagnosticsReport::Sample s;
    s.state_error = (xhat_t - x_t).norm();
    s.noise_norm = noise.norm();
    s.bound = bound_factor * s.noise_norm;
    s.satisfied = s.state_error <= s.bound;
    if (s.satisfied) ++satisfied;
    report.samples.push_back(s);
  }
  report.satisfied_fraction =
      static_cast<double>(satisfied) / static_cast<double>(n_trials);
  return report;
}

void write_diagnostics_json(const DiagnosticsReport& report,
                            const std::string& path) {
  using nlohmann::json;
  json j;
  j["format_version"] = kReportFormatVersion;
  j["system"] = report.system;
  j["ell"] = report.ell;
  j["noise_level"] = report.noise_level;
  j["gamma_f_hat"] = report.gamma_f_hat;
  j["alpha_ell_hat"] = report.alpha_ell_hat;
  j["observable"] = report.observable;
  j["satisfied_fraction"] = report.satisfied_fraction;
  json samples = json::array();
  for (const DiagnosticsReport::Sample& s : report.samples) {
    samples.push_back({{"state_error", s.state_error},
                       {"noise_norm", s.noise_norm},
                       {"bound", s.bound},
                       {"satisfied", s.satisfied}});
  }
  j["samples"] = std::move(samples);
  detail::write_json_file(j, path);
}

void write_diagnostics_csv(const DiagnosticsReport& report,
                           const std::string& path) {
  std::ofstream out = detail::open_csv(path);
  out << "trial,state_error,noise_norm,bound,satisfied\n";
  for (std::size_t i = 0; i < report.samples.size(); ++i) {
    const DiagnosticsReport::Sample& s = report.samples[i];
    out << i << ',' << detail::fmt_g17(s.state_error) << ','
        << detail::fmt_g17(s.noise_norm) << ',' << detail::fmt_g17(s.bound)
        << ',' << (s.satisfied ? 1 : 0) << '\n';
  }
  detail::finish_csv(out, path);
}

DiagnosticsReport load_diagnostics_json(const std::string& path) {
  using nlohmann::json;
  const json j = detail::load_json_file(path);
  detail::check_format_version(j, kReportFormatVersion, path);
  DiagnosticsReport report;
  report.system = detail::require_key(j, "system", path).get<std::string>();
  report.ell = detail::require_key(j, "ell", path).get<int>();
  report.noise_level =
      detail::require_key(j, "noise_level", path).get<double>();
  report.gamma_f_hat =
      detail::require_key(j, "gamma_f_hat", path).get<double>();
  report.alpha_ell_hat =
      detail::require_key(j, "alpha_ell_hat", path).get<double>();
  report.observable = detail::require_key(j, "observable", path).get<bool>();
  report.satisfied_fraction =
      detail::require_key(j, "satisfied_fraction", path).get<double>();
  for (const json& sj : detail::require_key(j, "samples", path)) {
    DiagnosticsReport::Sample s;
    s.state_error = detail::require_key(sj, "state_error", path).get<double>();
    s.noise_norm = detail::require_key(sj, "noise_norm", path).get<double>();
    s.bound = detail::require_key(sj, "bound", path).get<double>();
    s.satisfied = detail::require_key(sj, "satisfied", path).get<bool>();
    report.samples.push_back(s);
  }
  return report;
}

std::vector<LemmaRow> check_lemma1(const Plant& plant, int i_max,
                                   const Box& state_box, const Box& input_box,
                                   int n_samples, std::uint64_t seed) {
  check_plant_boxes(plant, state_box, input_box);
  if (i_max < 1) throw UsageError("i_max must be at least 1");
  if (n_samples < 1) throw UsageError("need at least one sample");

  std::mt19937_64 rng(seed);
  double gamma = 0.0;
  std::vector<double> max_quotient(i_max, 0.0);
  for (int k = 0; k < n_samples; ++k) {
    const Eigen::VectorXd x = sample_box(state_box, rng);
    const Eigen::VectorXd xp = sample_partner(state_box, x, k % 2 == 1, rng);
    const Eigen::MatrixXd u = sample_inputs(input_box, i_max, rng);
    const double d0 = (x - xp).norm();
    if (d0 == 0.0) continue;

    Eigen::VectorXd a = x;
    Eigen::VectorXd b = xp;
    double prev_dist = d0;
    for (int i = 0; i < i_max; ++i) {
      const Eigen::VectorXd uk = u.row(i).transpose();
      a = plant.step(a, uk);
      b = plant.step(b, uk);
      const double dist = (a - b).norm();
      if (prev_dist > 0.0) {
        gamma = std::max(gamma, dist / prev_dist);
      }
      max_quotient[i] = std::max(max_quotient[i], dist / d0);
      prev_dist = dist;
    }
  }

  std::vector<LemmaRow> rows(i_max);
  for (int i = 0; i < i_max; ++i) {
    rows[i].i = i + 1;
    rows[i].max_quotient = max_quotient[i];
    rows[i].gamma_pow = std::pow(gamma, i + 1);
  }
  return rows;
}

}  // namespace dynoid
