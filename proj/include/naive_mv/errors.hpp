#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace naive_mv {

/// Argument outside the mathematical domain of an operation (t < s, k <= r, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A market or target violates one of the standing assumptions (A1)-(A3).
class AssumptionViolation : public std::runtime_error {
public:
    AssumptionViolation(std::string assumption, const std::string& what)
        : std::runtime_error(assumption + ": " + what), assumption_(std::move(assumption)) {}

    const std::string& assumption() const noexcept { return assumption_; }

private:
    std::string assumption_;
};

/// Inconsistent experiment setup: misaligned dyadic grid, exact_log on an affine policy, ...
class ConfigurationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Requested operation is not available for this input (e.g. moment ODE of a nonlinear policy).
class UnsupportedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double last_residual, std::size_t iterations)
        : std::runtime_error(what), last_residual_(last_residual), iterations_(iterations) {}

    double last_residual() const noexcept { return last_residual_; }
    std::size_t iterations() const noexcept { return iterations_; }

private:
    double last_residual_;
    std::size_t iterations_;
};

/// Malformed configuration text. line() is 1-based, 0 when not tied to a line.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace naive_mv
