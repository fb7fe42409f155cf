#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace nearnet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: violated invariants, malformed files, mismatched shapes.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed (singular system, non-convergence, stalled planner).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Collects every problem found while validating a composite input.
class ValidationReport : public ValidationError {
 public:
  explicit ValidationReport(std::vector<std::string> issues)
      : ValidationError(join(issues)), issues_(std::move(issues)) {}

  const std::vector<std::string>& issues() const { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& issues) {
    std::string out = std::to_string(issues.size()) + " validation error(s):";
    for (const auto& s : issues) out += "\n  - " + s;
    return out;
  }

  std::vector<std::string> issues_;
};

}  // namespace nearnet
