#pragma once

#include <stdexcept>
#include <string>

namespace sharecast {

/// Bad input: malformed files, inconsistent sources, invalid arguments.
/// The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure while fitting (non-convergence, divergence).
/// The CLI maps this to exit code 1.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, double residual = 0.0)
        : std::runtime_error(what), residual_(residual) {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

}  // namespace sharecast
