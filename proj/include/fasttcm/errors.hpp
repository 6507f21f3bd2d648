#pragma once

#include <stdexcept>
#include <string>

namespace ftcm {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape or rank violations (mismatched operands, non-scalar loss, ...).
class ShapeError : public Error {
public:
    using Error::Error;
};

// Bad values: non-binary labels, unknown vocabulary tokens, degenerate inputs.
class ValueError : public Error {
public:
    using Error::Error;
};

// Invalid configuration (tau <= 0, hash mismatch, inconsistent switches).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Operation called in the wrong cue mode (fast vs tcm).
class ModeError : public Error {
public:
    using Error::Error;
};

// File and format errors.
class IoError : public Error {
public:
    using Error::Error;
};

// Training aborted (non-finite loss).
class TrainError : public Error {
public:
    using Error::Error;
};

} // namespace ftcm
