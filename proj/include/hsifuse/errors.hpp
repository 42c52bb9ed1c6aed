#pragma once

#include <stdexcept>
#include <string>

namespace hsifuse {

/// Thrown when a caller violates a documented precondition.
class ContractViolation : public std::invalid_argument {
 public:
  explicit ContractViolation(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Thrown by file readers/writers; `kind()` identifies the failure class.
class IoError : public std::runtime_error {
 public:
  enum class Kind { open_failed, bad_magic, bad_version, truncated, value_out_of_range, malformed };

  IoError(Kind k, const std::string& msg) : std::runtime_error(msg), kind_(k) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Thrown when an optimizer step sees a non-finite gradient.
class NonFiniteGradient : public std::runtime_error {
 public:
  explicit NonFiniteGradient(const std::string& msg) : std::runtime_error(msg) {}
};

/// Thrown when robust model estimation cannot produce a model.
class NoModelError : public std::runtime_error {
 public:
  explicit NoModelError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractViolation(msg);
}

}  // namespace hsifuse
