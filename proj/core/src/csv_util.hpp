#pragma once

#include <cstdio>
#include <fstream>
#include <string>

#include "dynoid/errors.hpp"

namespace dynoid::detail {

/// Shortest exact decimal form; %.17g round-trips doubles bit-exactly.
inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

inline void finish_csv(std::ofstream& out, const std::string& path) {
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace dynoid::detail
