#pragma once

#include <stdexcept>
#include <string>

namespace picore {

/// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid configuration or argument (CLI exit code 2).
struct ConfigError : Error {
    using Error::Error;
};

/// Numerical failure: CFL violation, blow-up, stalled iteration (CLI exit code 3).
struct NumericalError : Error {
    using Error::Error;
};

struct CflViolation : NumericalError {
    using NumericalError::NumericalError;
};
struct NonFiniteState : NumericalError {
    using NumericalError::NumericalError;
};
struct NoConvergence : NumericalError {
    using NumericalError::NumericalError;
};

struct ShapeMismatch : ConfigError {
    using ConfigError::ConfigError;
};
struct AxisTooShort : ConfigError {
    using ConfigError::ConfigError;
};
struct NonDivisibleFactor : ConfigError {
    using ConfigError::ConfigError;
};
struct ResolutionTooLow : ConfigError {
    using ConfigError::ConfigError;
};
struct BudgetOutOfRange : ConfigError {
    using ConfigError::ConfigError;
};
struct ZeroVector : ConfigError {
    using ConfigError::ConfigError;
};
struct ZeroReference : ConfigError {
    using ConfigError::ConfigError;
};
struct MissingLabels : ConfigError {
    using ConfigError::ConfigError;
};
struct ZeroDenominator : ConfigError {
    using ConfigError::ConfigError;
};
struct MixedDatasets : ConfigError {
    using ConfigError::ConfigError;
};
struct SelectorLabelRequired : ConfigError {
    using ConfigError::ConfigError;
};

}  // namespace picore
