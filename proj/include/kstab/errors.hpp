#pragma once

#include <stdexcept>
#include <string>

namespace kstab {

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Input/validation failures: bad geometry, bad weight, malformed spec files.
/// The command-line tool maps these to exit code 1.
struct ValidationError : Error {
  using Error::Error;
};

/// Numerical failures: ill-conditioning, lost convexity, failed evaluation.
/// The command-line tool maps these to exit code 2.
struct NumericalError : Error {
  using Error::Error;
};

// ---- geometry -------------------------------------------------------------

struct UnboundedPolytope : ValidationError {
  using ValidationError::ValidationError;
};
struct EmptyInterior : ValidationError {
  using ValidationError::ValidationError;
};
struct NotSimple : ValidationError {
  using ValidationError::ValidationError;
};
struct RedundantLabel : ValidationError {
  using ValidationError::ValidationError;
};
struct NonPositiveWeight : ValidationError {
  using ValidationError::ValidationError;
};

// ---- quadrature -----------------------------------------------------------

struct DegenerateSimplex : NumericalError {
  using NumericalError::NumericalError;
};
struct NodeEvaluationFailure : NumericalError {
  using NumericalError::NumericalError;
};

// ---- potentials -----------------------------------------------------------

/// Jet requested at a point with some label value below the geometric
/// tolerance (on or outside the boundary).
struct BoundaryEvaluation : NumericalError {
  using NumericalError::NumericalError;
};
/// Hessian fails to be positive definite at an evaluation point.
struct NotConvexAt : NumericalError {
  using NumericalError::NumericalError;
};
/// A potential failed its convexity certificate as a whole.
struct NotConvex : NumericalError {
  using NumericalError::NumericalError;
};

// ---- stability ------------------------------------------------------------

struct IllConditionedGram : NumericalError {
  using NumericalError::NumericalError;
};
/// Test function handed to the boundary norm without being normalized.
struct NotNormalized : ValidationError {
  using ValidationError::ValidationError;
};

// ---- energy ---------------------------------------------------------------

/// Line search could not find an acceptable step above the minimum step size.
struct LostConvexity : NumericalError {
  using NumericalError::NumericalError;
};

// ---- spec files -----------------------------------------------------------

struct SpecParseError : ValidationError {
  using ValidationError::ValidationError;
};

}  // namespace kstab
