#include <cstdlib>
#include <fstream>

#include "doctest.h"
#include "dynoid/config.hpp"
#include "dynoid/errors.hpp"
#include "test_util.hpp"

using namespace dynoid;

namespace {

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("defaults describe the standard experiment") {
  const ExperimentConfig cfg = default_config();
  CHECK(cfg.system == "tank");
  CHECK(cfg.seed == 0);
  CHECK(cfg.window_sizes == std::vector<int>{5, 10, 15, 20, 25, 30});
  CHECK(cfg.eval_horizon == 100);
  REQUIRE(cfg.reduction_rates.size() == 6);
  CHECK(cfg.reduction_rates.front() == 0.15);
  CHECK(cfg.reduction_rates.back() == 0.90);
  CHECK(cfg.regressor_training.hidden_dims == std::vector<int>{256, 256, 256});
  CHECK(cfg.regressor_training.epochs == 2000);
  CHECK(cfg.regressor_training.lr == 1e-4);
  CHECK(cfg.autoencoder_training.hidden_dims == std::vector<int>{512, 512});
  CHECK(cfg.autoencoder_training.epochs == 500);
  CHECK(!cfg.autoencoder_training.joint_reconstruction);
  CHECK(cfg.diagnostics.ell == 5);
  CHECK(cfg.diagnostics.trials == 200);
  CHECK(cfg.tank.n_train == 60);
  CHECK(cfg.drone.n_train == 500);
  CHECK_NOTHROW(validate_config(cfg));
}

TEST_CASE("partial files override only their keys") {
  testutil::TempDir dir("cfg_partial");
  spit(dir.file("c.json"),
       R"({"system": "drone2d", "regressor_training": {"epochs": 7},
           "tank": {"noise_sigma": [0.0]}, "seed": 33})");
  const ExperimentConfig cfg = load_config(dir.file("c.json"));
  CHECK(cfg.system == "drone2d");
  CHECK(cfg.seed == 33);
  CHECK(cfg.regressor_training.epochs == 7);
  CHECK(cfg.regressor_training.lr == 1e-4);           // untouched default
  CHECK(cfg.autoencoder_training.epochs == 500);      // untouched default
  CHECK(cfg.tank.noise_sigma.size() == 1);
  CHECK(cfg.tank.noise_sigma(0) == 0.0);
  CHECK(cfg.tank.n_train == 60);
}

TEST_CASE("unknown keys are rejected with their name") {
  testutil::TempDir dir("cfg_unknown");
  spit(dir.file("c.json"), R"({"sytem": "tank"})");
  try {
    (void)load_config(dir.file("c.json"));
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("sytem") != std::string::npos);
  }

  spit(dir.file("d.json"), R"({"tank": {"level_maximum": 3.0}})");
  CHECK_THROWS_AS((void)load_config(dir.file("d.json")), ParseError);
}

TEST_CASE("malformed JSON raises ParseError and missing files IoError") {
  testutil::TempDir dir("cfg_bad");
  spit(dir.file("c.json"), "{\"system\": ");
  CHECK_THROWS_AS((void)load_config(dir.file("c.json")), ParseError);
  CHECK_THROWS_AS((void)load_config(dir.file("missing.json")), IoError);
}

TEST_CASE("validation rejects out-of-range values") {
  ExperimentConfig cfg = default_config();
  cfg.system = "boat";
  try {
    validate_config(cfg);
    FAIL("expected UsageError");
  } catch (const UsageError& e) {
    const std::string what = e.what();
    CHECK(what.find("tank") != std::string::npos);
    CHECK(what.find("drone2d") != std::string::npos);
  }

  cfg = default_config();
  cfg.window_sizes = {5, 0};
  CHECK_THROWS_AS(validate_config(cfg), UsageError);

  cfg = default_config();
  cfg.reduction_rates = {0.5, 1.5};
  CHECK_THROWS_AS(validate_config(cfg), UsageError);

  cfg = default_config();
  cfg.eval_horizon = 0;
  CHECK_THROWS_AS(validate_config(cfg), UsageError);

  cfg = default_config();
  cfg.regressor_training.epochs = 0;
  CHECK_THROWS_AS(validate_config(cfg), UsageError);
}

TEST_CASE("configs round-trip through save and load") {
  ExperimentConfig cfg = default_config();
  cfg.system = "drone2d";
  cfg.seed = 99;
  cfg.window_sizes = {4, 8};
  cfg.reduction_rates = {0.25, 0.5};
  cfg.regressor_training.hidden_dims = {32, 32};
  cfg.regressor_training.activation = Activation::kRelu;
  cfg.autoencoder_training.joint_reconstruction = true;
  cfg.diagnostics.grid_points = 101;
  cfg.drone.n_train = 12;
  testutil::TempDir dir("cfg_rt");
  save_config(cfg, dir.file("c.json"));
  const ExperimentConfig back = load_config(dir.file("c.json"));
  CHECK(back.system == "drone2d");
  CHECK(back.seed == 99);
  CHECK(back.window_sizes == cfg.window_sizes);
  CHECK(back.reduction_rates == cfg.reduction_rates);
  CHECK(back.regressor_training.hidden_dims == std::vector<int>{32, 32});
  CHECK(back.regressor_training.activation == Activation::kRelu);
  CHECK(back.autoencoder_training.joint_reconstruction);
  CHECK(back.diagnostics.grid_points == 101);
  CHECK(back.drone.n_train == 12);
}

TEST_CASE("seed precedence is flag, environment, config") {
  ExperimentConfig cfg = default_config();
  cfg.seed = 5;
  unsetenv("DYNOID_SEED");
  CHECK(resolve_seed(cfg, std::nullopt) == 5);

  setenv("DYNOID_SEED", "9", 1);
  CHECK(resolve_seed(cfg, std::nullopt) == 9);
  CHECK(resolve_seed(cfg, 3) == 3);

  setenv("DYNOID_SEED", "12x", 1);
  CHECK_THROWS_AS((void)resolve_seed(cfg, std::nullopt), UsageError);
  setenv("DYNOID_SEED", "", 1);
  CHECK_THROWS_AS((void)resolve_seed(cfg, std::nullopt), UsageError);
  unsetenv("DYNOID_SEED");
  CHECK(resolve_seed(cfg, std::nullopt) == 5);
}

}  // TEST_SUITE
