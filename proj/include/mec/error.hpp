#pragma once

#include <stdexcept>
#include <string>

namespace mec {

/// Caller broke a documented precondition (invalid action, shape mismatch, ...).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Configuration or parameter set failed schema/range validation.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An estimator was asked for a value it cannot define (e.g. empty window).
class EstimatorError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ContractViolation(what);
}

}  // namespace detail
}  // namespace mec
