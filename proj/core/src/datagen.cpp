#include "dynoid/datagen.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <utility>

#include "json_util.hpp"
#include "seed_util.hpp"

namespace dynoid {

namespace {

constexpr int kDatasetFormatVersion = 1;

std::string make_id(const std::string& prefix, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s-%03d", prefix.c_str(), index);
  return buf;
}

}  // namespace

Eigen::VectorXd Normalization::normalize_u(const Eigen::VectorXd& u) const {
  return (u - u_mean).cwiseQuotient(u_std);
}

Eigen::VectorXd Normalization::normalize_y(const Eigen::VectorXd& y) const {
  return (y - y_mean).cwiseQuotient(y_std);
}

Eigen::VectorXd Normalization::denormalize_y(const Eigen::VectorXd& y) const {
  return y.cwiseProduct(y_std) + y_mean;
}

Eigen::MatrixXd Normalization::normalize_u_rows(
    const Eigen::MatrixXd& u) const {
  return (u.rowwise() - u_mean.transpose()).array().rowwise() /
         u_std.transpose().array();
}

Eigen::MatrixXd Normalization::normalize_y_rows(
    const Eigen::MatrixXd& y) const {
  return (y.rowwise() - y_mean.transpose()).array().rowwise() /
         y_std.transpose().array();
}

Eigen::MatrixXd Normalization::denormalize_y_rows(
    const Eigen::MatrixXd& y) const {
  return (y.array().rowwise() * y_std.transpose().array()).matrix().rowwise() +
         y_mean.transpose();
}

const std::vector<Trajectory>& Dataset::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "valid") return valid;
  if (name == "test") return test;
  throw UsageError("unknown split '" + name + "'");
}

Normalization compute_normalization(const std::vector<Trajectory>& train) {
  if (train.empty()) throw UsageError("normalization needs trajectories");
  const Eigen::Index n_u = train.front().inputs.cols();
  const Eigen::Index n_y = train.front().outputs.cols();
  Eigen::VectorXd u_sum = Eigen::VectorXd::Zero(n_u);
  Eigen::VectorXd y_sum = Eigen::VectorXd::Zero(n_y);
  long count = 0;
  for (const Trajectory& tr : train) {
    u_sum += tr.inputs.colwise().sum().transpose();
    y_sum += tr.outputs.colwise().sum().transpose();
    count += tr.length();
  }
  Normalization norm;
  norm.u_mean = u_sum / static_cast<double>(count);
  norm.y_mean = y_sum / static_cast<double>(count);

  Eigen::VectorXd u_sq = Eigen::VectorXd::Zero(n_u);
  Eigen::VectorXd y_sq = Eigen::VectorXd::Zero(n_y);
  for (const Trajectory& tr : train) {
    u_sq += (tr.inputs.rowwise() - norm.u_mean.transpose())
                .array()
                .square()
                .colwise()
                .sum()
                .matrix()
                .transpose();
    y_sq += (tr.outputs.rowwise() - norm.y_mean.transpose())
                .array()
                .square()
                .colwise()
                .sum()
                .matrix()
                .transpose();
  }
  // The floor keeps constant channels from dividing by ~0.
  norm.u_std =
      (u_sq / static_cast<double>(count)).cwiseSqrt().cwiseMax(1e-8);
  norm.y_std =
      (y_sq / static_cast<double>(count)).cwiseSqrt().cwiseMax(1e-8);
  return norm;
}

namespace {

Trajectory simulate_tank(const TankDatasetConfig& cfg, std::uint64_t base_seed,
                         const std::string& id) {
  std::mt19937_64 rng(base_seed);
  std::uniform_real_distribution<double> level(0.0, cfg.level_max);

  Eigen::MatrixXd waypoints(cfg.waypoint_count, 1);
  for (int i = 0; i < cfg.waypoint_count; ++i) waypoints(i, 0) = level(rng);
  const Eigen::MatrixXd reference = spline_reference(waypoints, cfg.horizon);

  Eigen::Vector2d x(level(rng), level(rng));
  Trajectory tr;
  tr.id = id;
  tr.dt = 1.0;
  tr.inputs.resize(cfg.horizon, 1);
  tr.outputs.resize(cfg.horizon, 1);
  tr.true_states = Eigen::MatrixXd(cfg.horizon, 2);

  PidState pid;
  for (int t = 0; t < cfg.horizon; ++t) {
    const double y = tank_observe(x, 0.0);
    const double u = pid_control(reference(t, 0), y, pid, cfg.pid);
    tr.inputs(t, 0) = u;
    tr.outputs(t, 0) = y;
    (*tr.true_states)(t, 0) = x(0);
    (*tr.true_states)(t, 1) = x(1);
    x = tank_step(x, u, cfg.plant);
  }
  tr.outputs =
      add_noise(tr.outputs, cfg.noise_sigma, detail::mix_seed(base_seed, 1));
  return tr;
}

Trajectory simulate_drone_once(const DroneDatasetConfig& cfg,
                               std::uint64_t base_seed,
                               const std::string& id) {
  std::mt19937_64 rng(base_seed);
  std::uniform_int_distribution<int> count_dist(cfg.waypoint_min,
                                                cfg.waypoint_max);
  std::uniform_real_distribution<double> coord(-cfg.waypoint_range,
                                               cfg.waypoint_range);

  const int n_way = count_dist(rng);
  Eigen::MatrixXd waypoints(n_way, 2);
  for (int i = 0; i < n_way; ++i) {
    waypoints(i, 0) = coord(rng);
    waypoints(i, 1) = coord(rng);
  }
  const Eigen::MatrixXd positions = spline_reference(waypoints, cfg.horizon);

  // Full-state reference: spline positions, finite-difference velocities,
  // level attitude.
  Eigen::Matrix<double, 6, Eigen::Dynamic> reference(6, cfg.horizon);
  reference.setZero();
  for (int t = 0; t < cfg.horizon; ++t) {
    reference(0, t) = positions(t, 0);
    reference(1, t) = positions(t, 1);
    if (t + 1 < cfg.horizon) {
      reference(3, t) = (positions(t + 1, 0) - positions(t, 0)) / cfg.plant.dt;
      reference(4, t) = (positions(t + 1, 1) - positions(t, 1)) / cfg.plant.dt;
    } else if (t > 0) {
      reference(3, t) = reference(3, t - 1);
      reference(4, t) = reference(4, t - 1);
    }
  }

  DroneState x = DroneState::Zero();
  x(0) = positions(0, 0);
  x(1) = positions(0, 1);

  Trajectory tr;
  tr.id = id;
  tr.dt = cfg.plant.dt;
  tr.inputs.resize(cfg.horizon, 2);
  tr.outputs.resize(cfg.horizon, 3);
  tr.true_states = Eigen::MatrixXd(cfg.horizon, 6);

  for (int t = 0; t < cfg.horizon; ++t) {
    const Eigen::Vector3d y = drone_observe(x);
    const int window = std::min(cfg.tracker.horizon, cfg.horizon - t);
    const Eigen::Vector2d u =
        lq_tracker(reference.middleCols(t, window), x, cfg.plant, cfg.tracker);
    tr.inputs.row(t) = u.transpose();
    tr.outputs.row(t) = y.transpose();
    tr.true_states->row(t) = x.transpose();
    x = drone_step(x, u, cfg.plant);
    if (x.head<2>().cwiseAbs().maxCoeff() > 1e3) {
      throw NumericError("drone trajectory diverged");
    }
  }
  tr.outputs =
      add_noise(tr.outputs, cfg.noise_sigma, detail::mix_seed(base_seed, 1));
  return tr;
}

Trajectory simulate_drone(const DroneDatasetConfig& cfg, std::uint64_t seed,
                          int index, const std::string& id) {
  constexpr int kMaxAttempts = 20;
  for (int attempt = 0;; ++attempt) {
    const std::uint64_t base =
        detail::mix_seed(detail::mix_seed(seed, index), 2 + attempt);
    try {
      return simulate_drone_once(cfg, base, id);
    } catch (const NumericError&) {
      if (attempt + 1 >= kMaxAttempts) {
        throw TrainingError("drone generation kept diverging for " + id,
                            attempt + 1);
      }
    }
  }
}

}  // namespace

Dataset generate_tank_dataset(const TankDatasetConfig& cfg,
                              std::uint64_t seed) {
  Dataset ds;
  ds.system = "tank";
  ds.n_u = 1;
  ds.n_y = 1;
  ds.dt = 1.0;
  int index = 0;
  auto fill = [&](std::vector<Trajectory>& out, int count) {
    out.reserve(count);
    for (int i = 0; i < count; ++i, ++index) {
      out.push_back(simulate_tank(cfg, detail::mix_seed(seed, index),
                                  make_id("tank", index)));
    }
  };
  fill(ds.train, cfg.n_train);
  fill(ds.valid, cfg.n_valid);
  fill(ds.test, cfg.n_test);
  ds.normalization = compute_normalization(ds.train);
  return ds;
}

Dataset generate_drone_dataset(const DroneDatasetConfig& cfg,
                               std::uint64_t seed) {
  Dataset ds;
  ds.system = "drone2d";
  ds.n_u = 2;
  ds.n_y = 3;
  ds.dt = cfg.plant.dt;
  int index = 0;
  auto fill = [&](std::vector<Trajectory>& out, int count) {
    out.reserve(count);
    for (int i = 0; i < count; ++i, ++index) {
      out.push_back(simulate_drone(cfg, seed, index, make_id("drone", index)));
    }
  };
  fill(ds.train, cfg.n_train);
  fill(ds.valid, cfg.n_valid);
  fill(ds.test, cfg.n_test);
  ds.normalization = compute_normalization(ds.train);
  return ds;
}

namespace {

using nlohmann::json;

json split_ids(const std::vector<Trajectory>& split) {
  json ids = json::array();
  for (const Trajectory& tr : split) ids.push_back(tr.id);
  return ids;
}

void append_records(std::ofstream& out, const std::vector<Trajectory>& split) {
  for (const Trajectory& tr : split) {
    json rec;
    rec["id"] = tr.id;
    rec["u"] = detail::matrix_to_json(tr.inputs);
    rec["y"] = detail::matrix_to_json(tr.outputs);
    rec["x"] = tr.true_states ? detail::matrix_to_json(*tr.true_states)
                              : json(nullptr);
    out << rec.dump() << '\n';
  }
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& header_path,
                  const std::string& data_path) {
  json header;
  header["format_version"] = kDatasetFormatVersion;
  header["system"] = ds.system;
  header["n_u"] = ds.n_u;
  header["n_y"] = ds.n_y;
  header["dt"] = ds.dt;
  header["splits"] = {{"train", split_ids(ds.train)},
                      {"valid", split_ids(ds.valid)},
                      {"test", split_ids(ds.test)}};
  header["normalization"] = {
      {"u_mean", detail::vector_to_json(ds.normalization.u_mean)},
      {"u_std", detail::vector_to_json(ds.normalization.u_std)},
      {"y_mean", detail::vector_to_json(ds.normalization.y_mean)},
      {"y_std", detail::vector_to_json(ds.normalization.y_std)}};
  detail::write_json_file(header, header_path);

  std::ofstream out(data_path);
  if (!out) throw IoError("cannot write " + data_path);
  append_records(out, ds.train);
  append_records(out, ds.valid);
  append_records(out, ds.test);
  if (!out) throw IoError("write failed for " + data_path);
}

Dataset load_dataset(const std::string& header_path,
                     const std::string& data_path) {
  const json header = detail::load_json_file(header_path);
  detail::check_format_version(header, kDatasetFormatVersion, header_path);

  Dataset ds;
  ds.system = detail::require_key(header, "system", header_path)
                  .get<std::string>();
  ds.n_u = detail::require_key(header, "n_u", header_path).get<int>();
  ds.n_y = detail::require_key(header, "n_y", header_path).get<int>();
  ds.dt = detail::require_key(header, "dt", header_path).get<double>();
  const json& norm = detail::require_key(header, "normalization", header_path);
  ds.normalization.u_mean = detail::vector_from_json(
      detail::require_key(norm, "u_mean", header_path), "u_mean");
  ds.normalization.u_std = detail::vector_from_json(
      detail::require_key(norm, "u_std", header_path), "u_std");
  ds.normalization.y_mean = detail::vector_from_json(
      detail::require_key(norm, "y_mean", header_path), "y_mean");
  ds.normalization.y_std = detail::vector_from_json(
      detail::require_key(norm, "y_std", header_path), "y_std");

  std::ifstream in(data_path);
  if (!in) throw IoError("cannot open " + data_path);
  std::map<std::string, Trajectory> by_id;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(data_path + ": " + e.what(), line_no);
    }
    Trajectory tr;
    tr.dt = ds.dt;
    try {
      tr.id = detail::require_key(rec, "id", "record").get<std::string>();
      tr.inputs = detail::matrix_from_json(
          detail::require_key(rec, "u", "record"), "u");
      tr.outputs = detail::matrix_from_json(
          detail::require_key(rec, "y", "record"), "y");
      const json& x = detail::require_key(rec, "x", "record");
      if (!x.is_null()) tr.true_states = detail::matrix_from_json(x, "x");
    } catch (const ParseError& e) {
      throw ParseError(data_path + ": " + e.what(), line_no);
    }
    if (tr.inputs.rows() != tr.outputs.rows()) {
      throw ParseError(data_path + ": input/output length mismatch", line_no);
    }
    if (tr.inputs.cols() != ds.n_u || tr.outputs.cols() != ds.n_y) {
      throw ParseError(data_path + ": channel count mismatch", line_no);
    }
    if (!by_id.emplace(tr.id, std::move(tr)).second) {
      throw ParseError(data_path + ": duplicate trajectory id", line_no);
    }
  }

  const json& splits = detail::require_key(header, "splits", header_path);
  auto gather = [&](const char* name, std::vector<Trajectory>& out) {
    const json& ids = detail::require_key(splits, name, header_path);
    out.reserve(ids.size());
    for (const json& id : ids) {
      auto it = by_id.find(id.get<std::string>());
      if (it == by_id.end()) {
        throw ParseError(data_path + ": trajectory '" + id.get<std::string>() +
                         "' listed in header but absent from data");
      }
      out.push_back(std::move(it->second));
      by_id.erase(it);
    }
  };
  gather("train", ds.train);
  gather("valid", ds.valid);
  gather("test", ds.test);
  if (!by_id.empty()) {
    throw ParseError(data_path + ": trajectory '" + by_id.begin()->first +
                     "' not listed in any split");
  }
  return ds;
}

}  // namespace dynoid
