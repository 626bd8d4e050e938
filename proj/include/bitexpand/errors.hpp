#pragma once

#include <stdexcept>
#include <string>

namespace bitexpand {

/// Shape or argument contract violated by the caller.
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numeric failure during computation (non-finite input or result).
class ComputationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid model or run configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Pixel value outside the declared bit-depth range.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Checkpoint or image file could not be read back.
class LoadError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace bitexpand
