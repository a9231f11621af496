#pragma once

#include <stdexcept>
#include <string>

namespace ellip {

// Shape or size of an input does not match what the operation requires.
struct InvalidShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Numeric contract broken: non-finite input, failed convergence, overflow.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A matrix that must be positive definite is not (or is so ill-conditioned
// that a Cholesky pivot falls below the safety floor).
struct NotPositiveDefiniteError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input data is degenerate for the requested computation, e.g. a point with
// (numerically) zero norm where a direction is needed.
struct DegenerateInputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Caller violated a documented precondition.
struct PreconditionError : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace ellip
