#pragma once

#include <stdexcept>
#include <string>

namespace hyplab {

// Base for all numerical failures. The CLI maps these to exit code 1.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct QuadratureFailure : NumericalError {
    using NumericalError::NumericalError;
};

struct OdeFailure : NumericalError {
    using NumericalError::NumericalError;
};

struct EnumerationTruncated : NumericalError {
    using NumericalError::NumericalError;
};

struct BandTooSmall : NumericalError {
    using NumericalError::NumericalError;
};

struct BoundNotReached : NumericalError {
    using NumericalError::NumericalError;
};

struct IllConditioned : NumericalError {
    using NumericalError::NumericalError;
};

struct NoMesh : NumericalError {
    using NumericalError::NumericalError;
};

// Precondition violations on caller-supplied parameters.
struct InvalidArgument : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw InvalidArgument(what);
}

}  // namespace hyplab
