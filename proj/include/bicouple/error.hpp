#pragma once

#include <stdexcept>
#include <string>

namespace bicouple {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A measure violates its invariants (non-SPD covariance, bad weights, ...).
class InvalidMeasure : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// A documented precondition on an argument does not hold.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// An iterative solver exhausted its iteration budget.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// A problem exceeds a solver's size budget.
class CapacityError : public Error {
public:
    using Error::Error;
};

/// A simulated state became non-finite.
class BlowUpError : public Error {
public:
    BlowUpError(const std::string& what, double suggested_step)
        : Error(what), suggested_step_(suggested_step) {}

    double suggested_step() const noexcept { return suggested_step_; }

private:
    double suggested_step_;
};

} // namespace bicouple
