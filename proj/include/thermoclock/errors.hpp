#pragma once

#include <stdexcept>
#include <string>

namespace thermoclock {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the domain of a function (support, sign, range).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Partition function or normalizer does not converge at the requested point.
class DivergenceError : public DomainError {
public:
    using DomainError::DomainError;
};

/// Estimator pushed to the edge of its range (e.g. all-ground-state sample).
class SaturationError : public DomainError {
public:
    using DomainError::DomainError;
};

class InsufficientSampleError : public DomainError {
public:
    using DomainError::DomainError;
};

/// Invalid configuration or parameter set; carries the offending field.
class ValidationError : public Error {
public:
    ValidationError(std::string field, const std::string& message)
        : Error(field + ": " + message), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Iterative numerics failed (non-convergence, rejected run).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Too many clock frequencies had to be clipped to stay positive.
class ClippingRateError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

} // namespace thermoclock
