#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace riskfield {

/// Base class for all riskfield errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid configuration value (bad window, out-of-range parameter, ...).
struct ConfigError : Error {
    using Error::Error;
};

/// Malformed input file; message carries the offending row where known.
struct ParseError : Error {
    using Error::Error;
};

/// Input violates a mathematical precondition (risk >= 1, point outside hull, ...).
struct DomainError : Error {
    using Error::Error;
};

/// Matrix could not be factorized as positive definite.
struct SingularityError : Error {
    using Error::Error;
};

/// Inference failure; carries the hyperparameter point that triggered it.
struct FitError : Error {
    FitError(const std::string& msg, std::vector<double> theta_at)
        : Error(msg), theta(std::move(theta_at)) {}
    std::vector<double> theta;
};

} // namespace riskfield
