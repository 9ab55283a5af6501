#pragma once

#include <stdexcept>
#include <string>

namespace splinesel {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure failed (non-convergence, degenerate denominator, ...).
class NumericError : public Error {
public:
    using Error::Error;
};

/// Malformed configuration, unknown identifiers, bad files.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace splinesel
