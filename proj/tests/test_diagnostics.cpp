#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <random>

#include "doctest.h"
#include "dynoid/diagnostics.hpp"
#include "dynoid/errors.hpp"
#include "test_util.hpp"

using namespace dynoid;

namespace {

/// x' = a x with full-state output, input ignored.
class ScaledPlant final : public Plant {
 public:
  explicit ScaledPlant(double a) : a_(a) {}
  int state_dim() const override { return 1; }
  int input_dim() const override { return 1; }
  int output_dim() const override { return 1; }
  Eigen::VectorXd step(const Eigen::VectorXd& x,
                       const Eigen::VectorXd&) const override {
    return a_ * x;
  }
  Eigen::VectorXd observe(const Eigen::VectorXd& x,
                          const Eigen::VectorXd&) const override {
    return x;
  }

 private:
  double a_;
};

/// Identity dynamics, output identically zero: nothing is observable.
class BlindPlant final : public Plant {
 public:
  int state_dim() const override { return 1; }
  int input_dim() const override { return 1; }
  int output_dim() const override { return 1; }
  Eigen::VectorXd step(const Eigen::VectorXd& x,
                       const Eigen::VectorXd&) const override {
    return x;
  }
  Eigen::VectorXd observe(const Eigen::VectorXd&,
                          const Eigen::VectorXd&) const override {
    return Eigen::VectorXd::Zero(1);
  }
};

Box unit_box(int dim) {
  Box box;
  box.lo = Eigen::VectorXd::Constant(dim, -1.0);
  box.hi = Eigen::VectorXd::Constant(dim, 1.0);
  return box;
}

Box tank_state_box() {
  Box box;
  box.lo = Eigen::Vector2d(0.1, 0.1);
  box.hi = Eigen::Vector2d(5.0, 5.0);
  return box;
}

Box tank_input_box() {
  Box box;
  box.lo = Eigen::VectorXd::Zero(1);
  box.hi = Eigen::VectorXd::Constant(1, 5.0);
  return box;
}

}  // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("one iteration equals a single plant step") {
  const TankPlant tank;
  const Eigen::VectorXd x = (Eigen::VectorXd(2) << 1.7, 0.9).finished();
  const Eigen::MatrixXd inputs = Eigen::MatrixXd::Constant(1, 1, 2.0);
  const Eigen::VectorXd via_iterate = iterate_dynamics(tank, x, inputs);
  const Eigen::VectorXd via_step = tank.step(x, inputs.row(0).transpose());
  CHECK((via_iterate.array() == via_step.array()).all());
}

TEST_CASE("two tank iterations match the frozen values") {
  const TankPlant tank;
  const Eigen::VectorXd x = (Eigen::VectorXd(2) << 1.0, 1.0).finished();
  const Eigen::MatrixXd inputs = Eigen::MatrixXd::Constant(2, 1, 1.0);
  const Eigen::VectorXd x2 = iterate_dynamics(tank, x, inputs);
  CHECK(x2(0) == doctest::Approx(0.82565835097474316).epsilon(1e-15));
  CHECK(x2(1) == doctest::Approx(0.80513167019494869).epsilon(1e-15));
}

TEST_CASE("iterated dynamics compose") {
  const TankPlant tank;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> level(0.1, 5.0);
  std::uniform_real_distribution<double> inflow(0.0, 5.0);
  Eigen::VectorXd x(2);
  x << level(rng), level(rng);
  Eigen::MatrixXd inputs(5, 1);
  for (int i = 0; i < 5; ++i) inputs(i, 0) = inflow(rng);
  const Eigen::VectorXd direct = iterate_dynamics(tank, x, inputs);
  const Eigen::VectorXd mid = iterate_dynamics(tank, x, inputs.topRows(2));
  const Eigen::VectorXd chained = iterate_dynamics(tank, mid, inputs.bottomRows(3));
  CHECK((direct - chained).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("observability map stacks outputs along the trajectory") {
  const TankPlant tank;
  const Eigen::VectorXd x = (Eigen::VectorXd(2) << 1.0, 1.0).finished();
  const Eigen::MatrixXd inputs = Eigen::MatrixXd::Constant(2, 1, 1.0);
  const Eigen::VectorXd obs = observability_map(tank, x, inputs);
  REQUIRE(obs.size() == 2);
  CHECK(obs(0) == 1.0);  // output at x itself
  CHECK(obs(1) == doctest::Approx(0.9).epsilon(1e-15));
}

TEST_CASE("sampled lipschitz constant of a scaling map is exact") {
  const Box box = unit_box(1);
  CHECK(estimate_lipschitz(ScaledPlant(2.0), box, box, 2000, 3) ==
        doctest::Approx(2.0).epsilon(1e-9));
  CHECK(estimate_lipschitz(ScaledPlant(0.5), box, box, 2000, 3) ==
        doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("sampled lipschitz constant is reproducible and stable") {
  const TankPlant tank;
  const double a = estimate_lipschitz(tank, tank_state_box(), tank_input_box(),
                                      100000, 7);
  const double b = estimate_lipschitz(tank, tank_state_box(), tank_input_box(),
                                      100000, 7);
  const double c = estimate_lipschitz(tank, tank_state_box(), tank_input_box(),
                                      100000, 8);
  CHECK(a == b);
  CHECK(a == doctest::Approx(c).epsilon(0.05));
  CHECK(a > 0.5);
  CHECK(a < 1.2);
}

TEST_CASE("alpha of a fully observed identity map is one") {
  const Box box = unit_box(1);
  const double alpha = estimate_alpha(ScaledPlant(1.0), 1, box, box, 2000, 4);
  CHECK(alpha == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("alpha vanishes without any output") {
  const Box box = unit_box(1);
  CHECK(estimate_alpha(BlindPlant(), 3, box, box, 500, 4) == 0.0);
}

TEST_CASE("tank alpha is positive and reproducible") {
  const TankPlant tank;
  const double a =
      estimate_alpha(tank, 10, tank_state_box(), tank_input_box(), 20000, 9);
  const double b =
      estimate_alpha(tank, 10, tank_state_box(), tank_input_box(), 20000, 9);
  CHECK(a == b);
  CHECK(a > 0.0);
}

TEST_CASE("inversion returns a grid point exactly") {
  const TankPlant tank;
  const Box sbox = tank_state_box();
  InvertOptions options;
  options.grid_points = 41;
  options.sweeps = 0;
  // Target on the grid, using the sampler's own arithmetic.
  const Eigen::VectorXd spacing = (sbox.hi - sbox.lo) / (options.grid_points - 1);
  Eigen::VectorXd x_true(2);
  x_true << sbox.lo(0) + 12 * spacing(0), sbox.lo(1) + 30 * spacing(1);
  const int ell = 3;
  const Eigen::MatrixXd inputs = Eigen::MatrixXd::Constant(ell, 1, 1.5);
  const Eigen::VectorXd measured = observability_map(tank, x_true, inputs);
  const auto [x_start, x_end] = invert_state(tank, ell, measured, inputs, sbox,
                                             options);
  CHECK((x_start.array() == x_true.array()).all());
  CHECK((x_end.array() ==
         iterate_dynamics(tank, x_true, inputs).array()).all());
}

TEST_CASE("refined inversion lands within one grid cell") {
  const TankPlant tank;
  const Box sbox = tank_state_box();
  InvertOptions options;
  options.grid_points = 41;
  options.sweeps = 50;
  const Eigen::VectorXd spacing = (sbox.hi - sbox.lo) / (options.grid_points - 1);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> level(0.2, 4.8);
  std::uniform_real_distribution<double> inflow(0.0, 5.0);
  const int ell = 5;
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd x_true(2);
    x_true << level(rng), level(rng);
    Eigen::MatrixXd inputs(ell, 1);
    for (int i = 0; i < ell; ++i) inputs(i, 0) = inflow(rng);
    const Eigen::VectorXd measured = observability_map(tank, x_true, inputs);
    const auto [x_start, x_end] =
        invert_state(tank, ell, measured, inputs, sbox, options);
    CHECK((x_start - x_true).cwiseAbs().maxCoeff() <= spacing.maxCoeff());
    CHECK((x_end - iterate_dynamics(tank, x_start, inputs)).cwiseAbs()
              .maxCoeff() == 0.0);
  }
}

TEST_CASE("high-dimensional inversion demands an initial guess") {
  const DronePlant drone;
  Box sbox;
  sbox.lo = Eigen::VectorXd::Constant(6, -1.0);
  sbox.hi = Eigen::VectorXd::Constant(6, 1.0);
  const int ell = 2;
  const double hover = drone_hover_speed(drone.params());
  const Eigen::MatrixXd inputs = Eigen::MatrixXd::Constant(ell, 2, hover);
  const Eigen::VectorXd x_true = Eigen::VectorXd::Zero(6);
  const Eigen::VectorXd measured = observability_map(drone, x_true, inputs);

  CHECK_THROWS_AS(
      (void)invert_state(drone, ell, measured, inputs, sbox, InvertOptions{}),
      UsageError);

  InvertOptions options;
  options.initial_guess = Eigen::VectorXd::Constant(6, 0.25);
  const auto [x_start, x_end] =
      invert_state(drone, ell, measured, inputs, sbox, options);
  CHECK(x_start.size() == 6);
  CHECK(sbox.clamp(x_start) == x_start);
  (void)x_end;
}

TEST_CASE("bound samples satisfy the advertised formula exactly") {
  const TankPlant tank;
  BoundCheckConfig config;
  config.state_box = tank_state_box();
  config.input_box = tank_input_box();
  config.constant_samples = 5000;
  config.invert.grid_points = 41;
  const DiagnosticsReport report =
      check_error_bound(tank, 4, 0.02, 20, 13, config);
  CHECK(report.ell == 4);
  CHECK(report.noise_level == 0.02);
  CHECK(report.observable);
  CHECK(report.gamma_f_hat > 0.0);
  CHECK(report.alpha_ell_hat > 0.0);
  REQUIRE(report.samples.size() == 20);
  const double factor =
      2.0 * std::pow(report.gamma_f_hat, 4) / report.alpha_ell_hat;
  int satisfied = 0;
  for (const auto& s : report.samples) {
    CHECK(s.bound == factor * s.noise_norm);
    CHECK(s.satisfied == (s.state_error <= s.bound));
    satisfied += s.satisfied ? 1 : 0;
  }
  CHECK(report.satisfied_fraction ==
        doctest::Approx(satisfied / 20.0).epsilon(1e-15));
}

TEST_CASE("noiseless inversion recovers the spun-up state") {
  const TankPlant tank;
  BoundCheckConfig config;
  config.state_box = tank_state_box();
  config.input_box = tank_input_box();
  config.constant_samples = 2000;
  // Shorter windows leave the residual too flat for this coarse grid.
  config.invert.grid_points = 61;
  const DiagnosticsReport report =
      check_error_bound(tank, 5, 0.0, 30, 17, config);
  REQUIRE(report.samples.size() == 30);
  for (const auto& s : report.samples) {
    CHECK(s.noise_norm == 0.0);
    CHECK(s.state_error <= 1e-2);
  }
}

TEST_CASE("an unobservable plant yields no samples") {
  const Box box = unit_box(1);
  BoundCheckConfig config;
  config.state_box = box;
  config.input_box = box;
  config.constant_samples = 500;
  const DiagnosticsReport report =
      check_error_bound(BlindPlant(), 2, 0.01, 10, 3, config);
  CHECK(!report.observable);
  CHECK(report.alpha_ell_hat == 0.0);
  CHECK(report.samples.empty());
  CHECK(report.satisfied_fraction == 0.0);
}

TEST_CASE("diagnostics report round-trips through JSON") {
  const TankPlant tank;
  BoundCheckConfig config;
  config.state_box = tank_state_box();
  config.input_box = tank_input_box();
  config.constant_samples = 1000;
  config.invert.grid_points = 21;
  DiagnosticsReport report = check_error_bound(tank, 3, 0.01, 5, 19, config);
  report.system = "tank";
  testutil::TempDir dir("diag_json");
  write_diagnostics_json(report, dir.file("diag.json"));
  const DiagnosticsReport back = load_diagnostics_json(dir.file("diag.json"));
  CHECK(back.system == report.system);
  CHECK(back.ell == report.ell);
  CHECK(back.gamma_f_hat == report.gamma_f_hat);
  CHECK(back.alpha_ell_hat == report.alpha_ell_hat);
  CHECK(back.satisfied_fraction == report.satisfied_fraction);
  REQUIRE(back.samples.size() == report.samples.size());
  for (std::size_t i = 0; i < report.samples.size(); ++i) {
    CHECK(back.samples[i].state_error == report.samples[i].state_error);
    CHECK(back.samples[i].bound == report.samples[i].bound);
    CHECK(back.samples[i].satisfied == report.samples[i].satisfied);
  }
}

TEST_CASE("diagnostics csv has one line per sample") {
  DiagnosticsReport report;
  report.system = "tank";
  report.ell = 2;
  report.samples.resize(3);
  report.samples[0].state_error = 0.5;
  testutil::TempDir dir("diag_csv");
  write_diagnostics_csv(report, dir.file("diag.csv"));
  std::ifstream in(dir.file("diag.csv"));
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "trial,state_error,noise_norm,bound,satisfied");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 3);
}

TEST_CASE("iterated contraction obeys the sampled per-step rate") {
  const Box box = unit_box(1);
  const std::vector<LemmaRow> rows =
      check_lemma1(ScaledPlant(0.5), 3, box, box, 1000, 23);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].i == 1);
  CHECK(rows[0].max_quotient == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(rows[0].max_quotient == doctest::Approx(rows[0].gamma_pow).epsilon(1e-12));
  CHECK(rows[1].max_quotient == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(rows[2].max_quotient == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(rows[2].gamma_pow == doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("tank chains expand no faster than the sampled rate") {
  const TankPlant tank;
  const std::vector<LemmaRow> rows = check_lemma1(
      tank, 5, tank_state_box(), tank_input_box(), 20000, 29);
  REQUIRE(rows.size() == 5);
  for (const LemmaRow& row : rows) {
    CHECK(row.max_quotient <= row.gamma_pow * (1.0 + 1e-9));
  }
}

}  // TEST_SUITE
