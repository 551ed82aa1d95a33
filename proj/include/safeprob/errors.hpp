#pragma once

#include <stdexcept>
#include <string>

#include "safeprob/linalg.hpp"

namespace safeprob {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Evaluator output or argument has the wrong dimensions.
class ShapeError : public Error {
public:
    using Error::Error;
};

// An operation was called outside its documented precondition.
class PreconditionError : public Error {
public:
    using Error::Error;
};

// Zero-CBF filter has no admissible input: the constraint is violated and
// the input has no authority over phi (L_g phi = 0).
class InfeasibleError : public Error {
public:
    InfeasibleError(const std::string& what, Vec state) : Error(what), state_(std::move(state)) {}
    const Vec& state() const noexcept { return state_; }

private:
    Vec state_;
};

class SolverError : public Error {
public:
    SolverError(const std::string& what, double residual, int iterations)
        : Error(what), residual_(residual), iterations_(iterations) {}
    double residual() const noexcept { return residual_; }
    int iterations() const noexcept { return iterations_; }

private:
    double residual_;
    int iterations_;
};

// Tabulated data violates a structural requirement (monotonicity, grids).
class DataError : public Error {
public:
    using Error::Error;
};

// Argument outside the mathematical domain of a formula.
class DomainError : public Error {
public:
    using Error::Error;
};

std::string format_state(const Vec& x);

}  // namespace safeprob
