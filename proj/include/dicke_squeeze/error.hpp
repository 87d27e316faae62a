#pragma once

#include <stdexcept>
#include <string>

namespace dicke {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Operators or states combined across incompatible bases.
class BasisMismatch : public Error {
public:
    explicit BasisMismatch(const std::string& msg) : Error("basis mismatch: " + msg) {}
};

/// Invalid parameters or configuration values.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

/// Density matrix or state that violates a precondition (trace, positivity).
class StateError : public Error {
public:
    explicit StateError(const std::string& msg) : Error(msg) {}
};

/// Integrator could not meet the requested tolerance.
class IntegrationError : public Error {
public:
    explicit IntegrationError(const std::string& msg) : Error(msg) {}
};

}  // namespace dicke
