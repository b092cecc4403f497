#include "dynoid/checkpoint.hpp"

#include <cmath>

#include "json_util.hpp"

namespace dynoid {

namespace {

using nlohmann::json;

constexpr int kCheckpointFormatVersion = 1;

json mlp_to_json(const MlpParams& params) {
  json j;
  j["layer_dims"] = params.layer_dims;
  j["activation"] = to_string(params.activation);
  json weights = json::array();
  json biases = json::array();
  for (int l = 0; l < params.layer_count(); ++l) {
    const Eigen::MatrixXd& w = params.weights[l];
    json flat = json::array();
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
    }
    weights.push_back(std::move(flat));
    biases.push_back(detail::vector_to_json(params.biases[l]));
  }
  j["weights"] = std::move(weights);
  j["biases"] = std::move(biases);
  return j;
}

MlpParams mlp_from_json(const json& j, const std::string& what) {
  MlpParams params;
  const json& dims = detail::require_key(j, "layer_dims", what);
  if (!dims.is_array() || dims.size() < 2) {
    throw ParseError(what + ": layer_dims must list at least two dims");
  }
  for (const json& d : dims) {
    const int dim = d.get<int>();
    if (dim < 1) throw ParseError(what + ": layer dims must be positive");
    params.layer_dims.push_back(dim);
  }
  params.activation = activation_from_string(
      detail::require_key(j, "activation", what).get<std::string>());

  const json& weights = detail::require_key(j, "weights", what);
  const json& biases = detail::require_key(j, "biases", what);
  const std::size_t layers = params.layer_dims.size() - 1;
  if (!weights.is_array() || weights.size() != layers ||
      !biases.is_array() || biases.size() != layers) {
    throw ParseError(what + ": weight/bias layer count mismatch");
  }
  for (std::size_t l = 0; l < layers; ++l) {
    const Eigen::Index rows = params.layer_dims[l + 1];
    const Eigen::Index cols = params.layer_dims[l];
    const json& flat = weights[l];
    if (!flat.is_array() ||
        static_cast<Eigen::Index>(flat.size()) != rows * cols) {
      throw ParseError(what + ": weight array size mismatch");
    }
    Eigen::MatrixXd w(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        w(r, c) = flat[k++].get<double>();
      }
    }
    Eigen::VectorXd b = detail::vector_from_json(biases[l], what + ": biases");
    if (b.size() != rows) throw ParseError(what + ": bias size mismatch");
    if (!w.allFinite() || !b.allFinite()) {
      throw ParseError(what + ": non-finite parameters");
    }
    params.weights.push_back(std::move(w));
    params.biases.push_back(std::move(b));
  }
  return params;
}

json normalization_to_json(const Normalization& norm) {
  return json{{"u_mean", detail::vector_to_json(norm.u_mean)},
              {"u_std", detail::vector_to_json(norm.u_std)},
              {"y_mean", detail::vector_to_json(norm.y_mean)},
              {"y_std", detail::vector_to_json(norm.y_std)}};
}

Normalization normalization_from_json(const json& j, const std::string& what) {
  Normalization norm;
  norm.u_mean =
      detail::vector_from_json(detail::require_key(j, "u_mean", what), what);
  norm.u_std =
      detail::vector_from_json(detail::require_key(j, "u_std", what), what);
  norm.y_mean =
      detail::vector_from_json(detail::require_key(j, "y_mean", what), what);
  norm.y_std =
      detail::vector_from_json(detail::require_key(j, "y_std", what), what);
  if ((norm.u_std.array() <= 0).any() || (norm.y_std.array() <= 0).any()) {
    throw ParseError(what + ": normalization stds must be positive");
  }
  return norm;
}

json spec_to_json(const StateMapSpec& spec) {
  return json{{"ell", spec.ell}, {"n_u", spec.n_u}, {"n_y", spec.n_y}};
}

StateMapSpec spec_from_json(const json& j, const std::string& what) {
  StateMapSpec spec;
  spec.ell = detail::require_key(j, "ell", what).get<int>();
  spec.n_u = detail::require_key(j, "n_u", what).get<int>();
  spec.n_y = detail::require_key(j, "n_y", what).get<int>();
  if (!spec.valid()) throw ParseError(what + ": invalid window spec");
  return spec;
}

}  // namespace

void save_mlp(const MlpParams& params, const std::string& path) {
  json j = mlp_to_json(params);
  j["format_version"] = kCheckpointFormatVersion;
  detail::write_json_file(j, path);
}

MlpParams load_mlp(const std::string& path) {
  const json j = detail::load_json_file(path);
  detail::check_format_version(j, kCheckpointFormatVersion, path);
  try {
    return mlp_from_json(j, path);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void save_model(const RegressorModel& model, const std::string& path) {
  json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["ell"] = model.spec.ell;
  j["n_u"] = model.spec.n_u;
  j["n_y"] = model.spec.n_y;
  j["normalization"] = normalization_to_json(model.normalization);
  j["mlp"] = mlp_to_json(model.h);
  detail::write_json_file(j, path);
}

RegressorModel load_model(const std::string& path) {
  const json j = detail::load_json_file(path);
  detail::check_format_version(j, kCheckpointFormatVersion, path);
  RegressorModel model;
  try {
    model.spec = spec_from_json(j, path);
    model.normalization = normalization_from_json(
        detail::require_key(j, "normalization", path), path);
    model.h = mlp_from_json(detail::require_key(j, "mlp", path), path);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  const StateMapSpec& s = model.spec;
  if (model.h.input_dim() != s.state_dim() + s.n_u ||
      model.h.output_dim() != s.n_y) {
    throw ParseError(path + ": network dims inconsistent with window spec");
  }
  if (model.normalization.u_mean.size() != s.n_u ||
      model.normalization.y_mean.size() != s.n_y) {
    throw ParseError(path + ": normalization dims inconsistent with spec");
  }
  return model;
}

void save_autoencoder(const Autoencoder& ae, const std::string& path) {
  json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["latent_dim"] = ae.latent_dim;
  j["source_spec"] = spec_to_json(ae.source_spec);
  j["encoder"] = mlp_to_json(ae.encoder);
  j["decoder"] = mlp_to_json(ae.decoder);
  detail::write_json_file(j, path);
}

Autoencoder load_autoencoder(const std::string& path) {
  const json j = detail::load_json_file(path);
  detail::check_format_version(j, kCheckpointFormatVersion, path);
  Autoencoder ae;
  try {
    ae.latent_dim = detail::require_key(j, "latent_dim", path).get<int>();
    ae.source_spec =
        spec_from_json(detail::require_key(j, "source_spec", path), path);
    ae.encoder = mlp_from_json(detail::require_key(j, "encoder", path), path);
    ae.decoder = mlp_from_json(detail::require_key(j, "decoder", path), path);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  const int L = ae.source_spec.state_dim();
  if (ae.latent_dim < 1 || ae.latent_dim > L ||
      ae.encoder.input_dim() != L || ae.encoder.output_dim() != ae.latent_dim ||
      ae.decoder.input_dim() != ae.latent_dim || ae.decoder.output_dim() != L) {
    throw ParseError(path + ": encoder/decoder dims inconsistent");
  }
  return ae;
}

}  // namespace dynoid
