#pragma once

#include <stdexcept>
#include <string>

namespace arcnet {

/// Input that violates a documented contract (bad file, unknown label, ...).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes that do not conform to a primitive's signature.
class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Non-finite values or failed numerical checks.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace arcnet
