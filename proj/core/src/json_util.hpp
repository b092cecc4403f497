#pragma once

#include <Eigen/Dense>
#include <fstream>
#include <string>

#include "dynoid/errors.hpp"
#include "json.hpp"

namespace dynoid::detail {

using nlohmann::json;

inline json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

inline Eigen::VectorXd vector_from_json(const json& arr,
                                        const std::string& what) {
  if (!arr.is_array()) throw ParseError(what + ": expected an array");
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw ParseError(what + ": expected numbers");
    v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
  }
  return v;
}

/// Rows of the matrix become inner arrays.
inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& rows,
                                        const std::string& what) {
  if (!rows.is_array()) throw ParseError(what + ": expected an array of rows");
  const Eigen::Index n_rows = static_cast<Eigen::Index>(rows.size());
  if (n_rows == 0) return Eigen::MatrixXd(0, 0);
  if (!rows[0].is_array()) throw ParseError(what + ": rows must be arrays");
  const Eigen::Index n_cols = static_cast<Eigen::Index>(rows[0].size());
  Eigen::MatrixXd m(n_rows, n_cols);
  for (Eigen::Index r = 0; r < n_rows; ++r) {
    const json& row = rows[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n_cols) {
      throw ParseError(what + ": ragged rows");
    }
    for (Eigen::Index c = 0; c < n_cols; ++c) {
      m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  return j;
}

inline void write_json_file(const json& j, const std::string& path,
                            int indent = 2) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(indent) << '\n';
  if (!out) throw IoError("write failed for " + path);
}

inline const json& require_key(const json& j, const std::string& key,
                               const std::string& what) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(what + ": missing key '" + key + "'");
  return *it;
}

inline void check_format_version(const json& j, int expected,
                                 const std::string& what) {
  const json& v = require_key(j, "format_version", what);
  if (!v.is_number_integer() || v.get<int>() != expected) {
    const int found = v.is_number_integer() ? v.get<int>() : -1;
    throw VersionError(what, found, expected);
  }
}

}  // namespace dynoid::detail
