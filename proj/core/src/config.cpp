#include "dynoid/config.hpp"

#include <cerrno>
#include <cstdlib>
#include <initializer_list>
#include <string>

#include "json_util.hpp"

namespace dynoid {

namespace {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& what) {
  if (!j.is_object()) throw ParseError(what + ": expected an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) throw ParseError(what + ": unknown key '" + item.key() + "'");
  }
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it != j.end()) out = it->get<T>();
}

void get_vector_if(const json& j, const char* key, Eigen::VectorXd& out,
                   const std::string& what) {
  auto it = j.find(key);
  if (it != j.end()) out = detail::vector_from_json(*it, what);
}

void apply_tank_params(const json& j, TankParams& p, const std::string& what) {
  check_keys(j, {"k1", "k2", "k3", "k4"}, what);
  get_if(j, "k1", p.k1);
  get_if(j, "k2", p.k2);
  get_if(j, "k3", p.k3);
  get_if(j, "k4", p.k4);
}

void apply_pid(const json& j, PidGains& g, const std::string& what) {
  check_keys(j, {"kp", "ki", "kd", "u_min", "u_max"}, what);
  get_if(j, "kp", g.kp);
  get_if(j, "ki", g.ki);
  get_if(j, "kd", g.kd);
  get_if(j, "u_min", g.u_min);
  get_if(j, "u_max", g.u_max);
}

void apply_tank(const json& j, TankDatasetConfig& cfg,
                const std::string& what) {
  check_keys(j,
             {"params", "pid", "level_max", "waypoint_count", "horizon",
              "n_train", "n_valid", "n_test", "noise_sigma"},
             what);
  if (j.contains("params")) {
    apply_tank_params(j["params"], cfg.plant, what + ".params");
  }
  if (j.contains("pid")) apply_pid(j["pid"], cfg.pid, what + ".pid");
  get_if(j, "level_max", cfg.level_max);
  get_if(j, "waypoint_count", cfg.waypoint_count);
  get_if(j, "horizon", cfg.horizon);
  get_if(j, "n_train", cfg.n_train);
  get_if(j, "n_valid", cfg.n_valid);
  get_if(j, "n_test", cfg.n_test);
  get_vector_if(j, "noise_sigma", cfg.noise_sigma, what + ".noise_sigma");
}

void apply_drone_params(const json& j, DroneParams& p,
                        const std::string& what) {
  check_keys(j,
             {"thrust", "friction", "arm_length", "mass", "inertia", "gravity",
              "dt", "omega_max"},
             what);
  get_if(j, "thrust", p.thrust);
  get_if(j, "friction", p.friction);
  get_if(j, "arm_length", p.arm_length);
  get_if(j, "mass", p.mass);
  get_if(j, "inertia", p.inertia);
  get_if(j, "gravity", p.gravity);
  get_if(j, "dt", p.dt);
  get_if(j, "omega_max", p.omega_max);
}

void apply_tracker(const json& j, LqTrackerConfig& cfg,
                   const std::string& what) {
  check_keys(j, {"horizon", "state_weights", "input_weights"}, what);
  get_if(j, "horizon", cfg.horizon);
  if (j.contains("state_weights")) {
    const Eigen::VectorXd w =
        detail::vector_from_json(j["state_weights"], what + ".state_weights");
    if (w.size() != 6) {
      throw ParseError(what + ": state_weights needs 6 entries");
    }
    cfg.state_weights = w;
  }
  if (j.contains("input_weights")) {
    const Eigen::VectorXd w =
        detail::vector_from_json(j["input_weights"], what + ".input_weights");
    if (w.size() != 2) {
      throw ParseError(what + ": input_weights needs 2 entries");
    }
    cfg.input_weights = w;
  }
}

void apply_drone(const json& j, DroneDatasetConfig& cfg,
                 const std::string& what) {
  check_keys(j,
             {"params", "tracker", "waypoint_range", "waypoint_min",
              "waypoint_max", "horizon", "n_train", "n_valid", "n_test",
              "noise_sigma"},
             what);
  if (j.contains("params")) {
    apply_drone_params(j["params"], cfg.plant, what + ".params");
  }
  if (j.contains("tracker")) {
    apply_tracker(j["tracker"], cfg.tracker, what + ".tracker");
  }
  get_if(j, "waypoint_range", cfg.waypoint_range);
  get_if(j, "waypoint_min", cfg.waypoint_min);
  get_if(j, "waypoint_max", cfg.waypoint_max);
  get_if(j, "horizon", cfg.horizon);
  get_if(j, "n_train", cfg.n_train);
  get_if(j, "n_valid", cfg.n_valid);
  get_if(j, "n_test", cfg.n_test);
  get_vector_if(j, "noise_sigma", cfg.noise_sigma, what + ".noise_sigma");
}

void apply_training(const json& j, TrainConfig& cfg, const std::string& what) {
  check_keys(j,
             {"epochs", "lr", "batch_size", "chunk_len", "hidden_dims",
              "activation", "grad_clip", "valid_every", "valid_fraction",
              "joint_reconstruction", "verbose"},
             what);
  get_if(j, "epochs", cfg.epochs);
  get_if(j, "lr", cfg.lr);
  get_if(j, "batch_size", cfg.batch_size);
  get_if(j, "chunk_len", cfg.chunk_len);
  get_if(j, "hidden_dims", cfg.hidden_dims);
  if (j.contains("activation")) {
    cfg.activation = activation_from_string(j["activation"].get<std::string>());
  }
  get_if(j, "grad_clip", cfg.grad_clip);
  get_if(j, "valid_every", cfg.valid_every);
  get_if(j, "valid_fraction", cfg.valid_fraction);
  get_if(j, "joint_reconstruction", cfg.joint_reconstruction);
  get_if(j, "verbose", cfg.verbose);
}

void apply_diagnostics(const json& j, DiagnosticsConfig& cfg,
                       const std::string& what) {
  check_keys(j,
             {"ell", "noise_level", "trials", "constant_samples",
              "grid_points", "sweeps"},
             what);
  get_if(j, "ell", cfg.ell);
  get_if(j, "noise_level", cfg.noise_level);
  get_if(j, "trials", cfg.trials);
  get_if(j, "constant_samples", cfg.constant_samples);
  get_if(j, "grid_points", cfg.grid_points);
  get_if(j, "sweeps", cfg.sweeps);
}

json tank_to_json(const TankDatasetConfig& cfg) {
  return json{
      {"params",
       {{"k1", cfg.plant.k1},
        {"k2", cfg.plant.k2},
        {"k3", cfg.plant.k3},
        {"k4", cfg.plant.k4}}},
      {"pid",
       {{"kp", cfg.pid.kp},
        {"ki", cfg.pid.ki},
        {"kd", cfg.pid.kd},
        {"u_min", cfg.pid.u_min},
        {"u_max", cfg.pid.u_max}}},
      {"level_max", cfg.level_max},
      {"waypoint_count", cfg.waypoint_count},
      {"horizon", cfg.horizon},
      {"n_train", cfg.n_train},
      {"n_valid", cfg.n_valid},
      {"n_test", cfg.n_test},
      {"noise_sigma", detail::vector_to_json(cfg.noise_sigma)}};
}

json drone_to_json(const DroneDatasetConfig& cfg) {
  return json{
      {"params",
       {{"thrust", cfg.plant.thrust},
        {"friction", cfg.plant.friction},
        {"arm_length", cfg.plant.arm_length},
        {"mass", cfg.plant.mass},
        {"inertia", cfg.plant.inertia},
        {"gravity", cfg.plant.gravity},
        {"dt", cfg.plant.dt},
        {"omega_max", cfg.plant.omega_max}}},
      {"tracker",
       {{"horizon", cfg.tracker.horizon},
        {"state_weights", detail::vector_to_json(cfg.tracker.state_weights)},
        {"input_weights", detail::vector_to_json(cfg.tracker.input_weights)}}},
      {"waypoint_range", cfg.waypoint_range},
      {"waypoint_min", cfg.waypoint_min},
      {"waypoint_max", cfg.waypoint_max},
      {"horizon", cfg.horizon},
      {"n_train", cfg.n_train},
      {"n_valid", cfg.n_valid},
      {"n_test", cfg.n_test},
      {"noise_sigma", detail::vector_to_json(cfg.noise_sigma)}};
}

json training_to_json(const TrainConfig& cfg) {
  return json{{"epochs", cfg.epochs},
              {"lr", cfg.lr},
              {"batch_size", cfg.batch_size},
              {"chunk_len", cfg.chunk_len},
              {"hidden_dims", cfg.hidden_dims},
              {"activation", to_string(cfg.activation)},
              {"grad_clip", cfg.grad_clip},
              {"valid_every", cfg.valid_every},
              {"valid_fraction", cfg.valid_fraction},
              {"joint_reconstruction", cfg.joint_reconstruction},
              {"verbose", cfg.verbose}};
}

}  // namespace

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  cfg.regressor_training.hidden_dims = {256, 256, 256};
  cfg.autoencoder_training.hidden_dims = {512, 512};
  cfg.autoencoder_training.epochs = 500;
  return cfg;
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.system != "tank" && cfg.system != "drone2d") {
    throw UsageError("unknown system '" + cfg.system +
                     "' (expected tank or drone2d)");
  }
  if (cfg.window_sizes.empty()) throw UsageError("window_sizes is empty");
  for (int w : cfg.window_sizes) {
    if (w < 1) throw UsageError("window sizes must be at least 1");
  }
  for (double r : cfg.reduction_rates) {
    if (!(r > 0.0 && r <= 1.0)) {
      throw UsageError("reduction rates must lie in (0, 1]");
    }
  }
  if (cfg.eval_horizon < 1) throw UsageError("eval_horizon must be positive");
  if (cfg.regressor_training.epochs < 1 || cfg.autoencoder_training.epochs < 1) {
    throw UsageError("epoch counts must be positive");
  }
  if (cfg.diagnostics.ell < 1) throw UsageError("diagnostics ell must be >= 1");
  if (cfg.diagnostics.trials < 1) {
    throw UsageError("diagnostics trials must be >= 1");
  }
}

ExperimentConfig load_config(const std::string& path) {
  const json j = detail::load_json_file(path);
  check_keys(j,
             {"system", "seed", "window_sizes", "out_dir", "eval_horizon",
              "reduction_rates", "tank", "drone", "regressor_training",
              "autoencoder_training", "diagnostics"},
             path);
  ExperimentConfig cfg = default_config();
  get_if(j, "system", cfg.system);
  get_if(j, "seed", cfg.seed);
  get_if(j, "window_sizes", cfg.window_sizes);
  get_if(j, "out_dir", cfg.out_dir);
  get_if(j, "eval_horizon", cfg.eval_horizon);
  get_if(j, "reduction_rates", cfg.reduction_rates);
  if (j.contains("tank")) apply_tank(j["tank"], cfg.tank, path + ": tank");
  if (j.contains("drone")) apply_drone(j["drone"], cfg.drone, path + ": drone");
  if (j.contains("regressor_training")) {
    apply_training(j["regressor_training"], cfg.regressor_training,
                   path + ": regressor_training");
  }
  if (j.contains("autoencoder_training")) {
    apply_training(j["autoencoder_training"], cfg.autoencoder_training,
                   path + ": autoencoder_training");
  }
  if (j.contains("diagnostics")) {
    apply_diagnostics(j["diagnostics"], cfg.diagnostics,
                      path + ": diagnostics");
  }
  validate_config(cfg);
  return cfg;
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
  json j;
  j["system"] = cfg.system;
  j["seed"] = cfg.seed;
  j["window_sizes"] = cfg.window_sizes;
  j["out_dir"] = cfg.out_dir;
  j["eval_horizon"] = cfg.eval_horizon;
  j["reduction_rates"] = cfg.reduction_rates;
  j["tank"] = tank_to_json(cfg.tank);
  j["drone"] = drone_to_json(cfg.drone);
  j["regressor_training"] = training_to_json(cfg.regressor_training);
  j["autoencoder_training"] = training_to_json(cfg.autoencoder_training);
  j["diagnostics"] = json{{"ell", cfg.diagnostics.ell},
                          {"noise_level", cfg.diagnostics.noise_level},
                          {"trials", cfg.diagnostics.trials},
                          {"constant_samples", cfg.diagnostics.constant_samples},
                          {"grid_points", cfg.diagnostics.grid_points},
                          {"sweeps", cfg.diagnostics.sweeps}};
  detail::write_json_file(j, path);
}

std::uint64_t resolve_seed(const ExperimentConfig& cfg,
                           std::optional<std::uint64_t> flag_seed) {
  if (flag_seed) return *flag_seed;
  if (const char* env = std::getenv("DYNOID_SEED")) {
    char* end = nullptr;
    errno = 0;
    const unsigned long long value = std::strtoull(env, &end, 10);
    if (errno != 0 || end == env || *end != '\0') {
      throw UsageError("DYNOID_SEED must be an unsigned integer, got '" +
                       std::string(env) + "'");
    }
    return static_cast<std::uint64_t>(value);
  }
  return cfg.seed;
}

}  // namespace dynoid
