#pragma once

#include <stdexcept>
#include <string>

namespace dynoid {

/// Invalid arguments, shapes, or configuration supplied by the caller.
class UsageError : public std::invalid_argument {
 public:
  explicit UsageError(const std::string& what) : std::invalid_argument(what) {}
};

/// File system trouble: missing files, unwritable paths.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed on-disk data. Carries a 1-based line number when known.
class ParseError : public IoError {
 public:
  ParseError(const std::string& what, long line = -1)
      : IoError(line >= 0 ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

/// File format version does not match what this build reads.
class VersionError : public IoError {
 public:
  VersionError(const std::string& what, int found, int expected)
      : IoError(what + ": found version " + std::to_string(found) +
                ", expected " + std::to_string(expected)),
        found_(found),
        expected_(expected) {}
  int found() const { return found_; }
  int expected() const { return expected_; }

 private:
  int found_;
  int expected_;
};

/// Non-finite values, diverging recursions, failed numeric procedures.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Training diverged. Reports the epoch at which the loss became non-finite.
class TrainingError : public NumericError {
 public:
  TrainingError(const std::string& what, int epoch)
      : NumericError(what + " (epoch " + std::to_string(epoch) + ")"),
        epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

}  // namespace dynoid
