#pragma once

#include <stdexcept>
#include <string>

namespace bdr {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (non-finite values, rank deficiency, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration: unknown columns, bad grid settings, missing group fits.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// An optimizer failed, a likelihood was degenerate, or a fit was unusable.
class EstimationError : public Error {
public:
    using Error::Error;
};

/// Tail-scale estimation could not satisfy its admissibility conditions.
class TailError : public EstimationError {
public:
    using EstimationError::EstimationError;
};

/// Bootstrap inference could not be carried out (too few draws, too many failures).
class InferenceError : public Error {
public:
    using Error::Error;
};

}  // namespace bdr
