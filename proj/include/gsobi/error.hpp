#pragma once

#include <stdexcept>
#include <string>

namespace gsobi {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input is well-formed but violates a documented precondition.
class ValidationError : public Error {
public:
    using Error::Error;
};

class InsufficientDataError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class LagTooLargeError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Numerical failure: the problem is valid but the computation could not finish.
class NumericalError : public Error {
public:
    using Error::Error;
};

class SingularMatrixError : public NumericalError {
public:
    SingularMatrixError(const std::string& what, double eigenvalue)
        : NumericalError(what), eigenvalue_(eigenvalue) {}

    [[nodiscard]] double eigenvalue() const noexcept { return eigenvalue_; }

private:
    double eigenvalue_;
};

class ConvergenceError : public NumericalError {
public:
    ConvergenceError(const std::string& what, double residual)
        : NumericalError(what), residual_(residual) {}

    /// Off-diagonal mass (or other residual measure) at the last iterate.
    [[nodiscard]] double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// A requested moment of a GARCH process does not exist for the given parameters.
class DivergentMomentError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// A statistic needs a nonzero variance but the input has none.
class DegenerateVarianceError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace gsobi
