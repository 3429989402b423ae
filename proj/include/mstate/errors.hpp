#pragma once

#include <stdexcept>
#include <string>

namespace mstate {

// Base of every error raised by the engine. The CLI maps the concrete type to
// an exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input: DSL syntax, JSON schema, bad command parameters.
class ConfigError : public Error {
public:
    using Error::Error;
};

class ParseError : public ConfigError {
public:
    ParseError(std::string message, std::size_t position, std::string expected)
        : ConfigError(message + " at position " + std::to_string(position) +
                      (expected.empty() ? std::string{} : " (expected " + expected + ")")),
          position_(position), expected_(std::move(expected)) {}

    std::size_t position() const { return position_; }
    const std::string& expected() const { return expected_; }

private:
    std::size_t position_;
    std::string expected_;
};

// Model data that parses but violates a modelling constraint
// (negative intensity, unbounded payment, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

// Failure during a numerical sweep: non-finite state, overflow, cap exceeded.
class NumericalError : public Error {
public:
    using Error::Error;
};

class DomainError : public NumericalError {
public:
    DomainError(const std::string& what, double t)
        : NumericalError(what + " at t=" + std::to_string(t)), t_(t) {}
    double t() const { return t_; }

private:
    double t_;
};

class CapExceeded : public NumericalError {
public:
    using NumericalError::NumericalError;
};

} // namespace mstate
