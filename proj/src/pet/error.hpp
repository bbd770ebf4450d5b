#pragma once

#include <stdexcept>
#include <string>

namespace pet {

/// Base of every error raised by the library. The C API maps each subclass
/// onto a distinct status code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition of an operation was not met by the caller.
class ContractViolation : public Error {
public:
    using Error::Error;
};

/// Tensor extents do not agree.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration (model, experiment, operator parameters).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Input exceeds what a model was built to accept (d > d_hat, N > max_seq, ...).
class CapacityError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent data (dataset records, checkpoints).
class DataError : public Error {
public:
    using Error::Error;
};

/// File system failure.
class IoError : public Error {
public:
    using Error::Error;
};

/// Requested feature has no implementation for the given input
/// (e.g. a reference front for a problem without an analytic front).
class Unsupported : public Error {
public:
    using Error::Error;
};

/// A problem produced a NaN objective or constraint value.
class NumericError : public Error {
public:
    using Error::Error;
};

/// An empty solution set was handed to IGD.
class EmptySet : public Error {
public:
    using Error::Error;
};

}  // namespace pet
