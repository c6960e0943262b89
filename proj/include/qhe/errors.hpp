#pragma once

#include <stdexcept>
#include <string>

namespace qhe {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input/configuration problems: bad parameter files, violated invariants
// on inputs, unsupported requests. CLI maps these to exit code 2.
struct ConfigError : Error {
    using Error::Error;
};

struct PreconditionViolated : ConfigError {
    using ConfigError::ConfigError;
};

// Numerical failures. CLI maps these to exit code 3.
struct NumericalError : Error {
    using Error::Error;
};

struct NoConvergence : NumericalError {
    using NumericalError::NumericalError;
};
struct PoleEncountered : NumericalError {
    using NumericalError::NumericalError;
};
struct SingularOperatingPoint : NumericalError {
    using NumericalError::NumericalError;
};
struct IllConditioned : NumericalError {
    using NumericalError::NumericalError;
};
struct NoTailDecay : NumericalError {
    using NumericalError::NumericalError;
};
struct QuadratureNotConverged : NumericalError {
    using NumericalError::NumericalError;
};
struct StiffnessDetected : NumericalError {
    using NumericalError::NumericalError;
};
struct HarmonicTruncation : NumericalError {
    using NumericalError::NumericalError;
};
struct DivisionDegenerate : NumericalError {
    using NumericalError::NumericalError;
};

}
