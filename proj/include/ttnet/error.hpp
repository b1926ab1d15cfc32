#pragma once

#include <stdexcept>
#include <string>

namespace ttnet {

/// Base for runtime failures that reach the command line. kind() is the
/// machine-parsable class name printed on exit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "Error"; }
};

class IoError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "IoError"; }
};

class ConfigError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "ConfigError"; }
};

class AnnotationError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "AnnotationError"; }
};

class CheckpointError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "CheckpointError"; }
};

class ResolutionMismatchError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "ResolutionMismatchError"; }
};

class InputError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "InputError"; }
};

class NonFiniteLossError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "NonFiniteLossError"; }
};

}  // namespace ttnet
