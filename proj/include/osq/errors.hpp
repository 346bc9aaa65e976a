#pragma once

#include <stdexcept>
#include <string>

namespace osq {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Evaluation hit a bare mechanical resonance (undamped susceptibility pole).
class PoleError : public Error {
public:
    using Error::Error;
};

/// Malformed or out-of-range configuration input.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// An operation was called with arguments violating its precondition.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Iterative procedure failed (minimizer, phase tracker, ...).
class ConvergenceError : public Error {
public:
    using Error::Error;
};

}  // namespace osq
