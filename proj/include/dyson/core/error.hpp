#pragma once

#include <stdexcept>
#include <string>

namespace dyson {

/// Base for every error raised by the pipeline.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: bad element sets, broken files, violated preconditions.
class InputError : public Error {
public:
    using Error::Error;
};

/// Parse failure with the offending 1-based line number.
class ParseError : public InputError {
public:
    ParseError(const std::string& what, std::size_t line)
        : InputError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// An iterative method ran out of iterations or diverged.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual = -1.0)
        : Error(what), residual_(residual) {}

    /// Last residual norm seen, negative when not applicable.
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Requested physics is impossible (no Lambert solution, mass exhausted, ...).
class InfeasibleError : public Error {
public:
    using Error::Error;
};

}  // namespace dyson
