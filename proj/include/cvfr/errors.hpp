#pragma once

#include <stdexcept>
#include <string>

namespace cvfr {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Shapes of an operation's inputs do not agree.
struct DimensionError : Error {
    using Error::Error;
};

/// beta^2*lambda^2 - 4c <= 0: the nonzero stationary values would be complex.
struct RealityConditionError : Error {
    using Error::Error;
};

/// The eigenvector matrix cannot be inverted to tolerance.
struct SingularMatrixError : Error {
    using Error::Error;
};

/// Planted images are numerically linearly dependent.
struct DependentAttractorsError : Error {
    using Error::Error;
};

/// A state entry became NaN/Inf during integration.
struct NonFiniteStateError : Error {
    using Error::Error;
};

/// Eigensolver exceeded its iteration budget.
struct ConvergenceError : Error {
    using Error::Error;
};

/// Training loss was non-finite twice in a row.
struct DivergenceAbortError : Error {
    using Error::Error;
};

/// IDX file starts with an unexpected magic number.
struct BadMagicError : Error {
    using Error::Error;
};

/// IDX image/label files disagree on item count.
struct CountMismatchError : Error {
    using Error::Error;
};

/// IDX file ends before the declared payload.
struct TruncatedFileError : Error {
    using Error::Error;
};

} // namespace cvfr
