#pragma once

#include <stdexcept>
#include <string>

namespace tp {

/// Parameters outside the admissible family (exit code 2 at the CLI).
class InvalidParameters : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A phase point outside the Boyer-Lindquist chart (axis, horizon, or beyond).
class ChartError : public InvalidParameters {
 public:
  using InvalidParameters::InvalidParameters;
};

/// Integrator or solver failure (exit code 4).
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A diagnostic gate was not met (exit code 3).
class QualityGateFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The zero-entropy reduction was requested for a system that is not
/// certified infinity-normally hyperbolic.
class NotNormallyHyperbolic : public QualityGateFailure {
 public:
  using QualityGateFailure::QualityGateFailure;
};

}  // namespace tp
