#pragma once

#include <stdexcept>
#include <string>

namespace ndsal {

// Base of every exception thrown by the library. `kind()` is a short stable
// token used by the CLI for machine-parseable error lines.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    virtual const char* kind() const noexcept { return "error"; }
};

class InvalidArgument : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "invalid_argument"; }
};

class FormatError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "format"; }
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    const char* kind() const noexcept override { return "convergence"; }
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

class NotFound : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "not_found"; }
};

}  // namespace ndsal
