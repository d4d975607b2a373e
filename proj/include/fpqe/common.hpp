#pragma once

#include <stdexcept>
#include <string>

namespace fpqe {

inline constexpr double kPi = 3.14159265358979323846;

// Shape or rank disagreement between operands.
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& msg) : std::runtime_error("shape error: " + msg) {}
};

// Inconsistent or invalid configuration (block arithmetic, qubit plans, presets).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};

// Malformed input files (IDX, CIFAR, FPQT containers, manifests).
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error("parse error: " + msg) {}
};

// Mathematically degenerate input: zero vectors where a direction is required,
// zero-norm latent channels, fully pruned coefficient sets.
class DegenerateInputError : public std::runtime_error {
public:
    explicit DegenerateInputError(const std::string& msg)
        : std::runtime_error("degenerate input: " + msg) {}
};

// I/O failure (missing files, refused overwrite, short writes).
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error("io error: " + msg) {}
};

}  // namespace fpqe
