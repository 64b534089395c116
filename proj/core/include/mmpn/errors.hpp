#pragma once

#include <stdexcept>
#include <string>

namespace mmpn {

// Bad inputs: schema violations, precondition failures, malformed files.
// CLI maps these to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// NaN/Inf escaped from a numeric kernel. Carries the op name. Exit code 3.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& op, const std::string& msg)
      : std::runtime_error(op + ": " + msg), op_(op) {}
  const std::string& op() const { return op_; }

 private:
  std::string op_;
};

}  // namespace mmpn
