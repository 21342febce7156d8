#pragma once

#include <stdexcept>
#include <string>

namespace mixmi {

/// Bad flags, bad config file, or inconsistent settings. CLI exit status 1.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or unusable input data. CLI exit status 2.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical routine could not produce a usable result. CLI exit status 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A fiber or component has nothing to train on. The engine catches this and
/// falls back; it only escapes when a caller asks for a fit directly.
class UntrainableError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace mixmi
