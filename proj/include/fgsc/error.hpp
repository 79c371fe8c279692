#pragma once

#include <stdexcept>
#include <string>

namespace fgsc {

/// Caller supplied something the operation cannot accept (bad label, empty
/// donor set, out-of-range period). Maps to CLI exit code 1.
class UsageError : public std::invalid_argument {
 public:
  explicit UsageError(const std::string& what) : std::invalid_argument(what) {}
};

/// Input data violates a panel invariant (missing cell, non-numeric value,
/// non-positive population). Maps to CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

enum class ExitCode : int {
  kSuccess = 0,
  kUsage = 1,
  kDataValidation = 2,
  kNonConvergence = 3,
};

}  // namespace fgsc
