#pragma once

#include <cmath>
#include <limits>
#include <ostream>

#include "error.hpp"

namespace bicouple {

/// A real number or +infinity. Relative entropy takes the value +inf when a
/// density does not exist; that branch is carried explicitly instead of
/// through a sentinel float.
class ExtendedReal {
public:
    constexpr ExtendedReal() = default;
    constexpr ExtendedReal(double v) : value_(v) {}  // NOLINT(google-explicit-constructor)

    static constexpr ExtendedReal infinity() {
        ExtendedReal r;
        r.infinite_ = true;
        return r;
    }

    constexpr bool is_infinite() const { return infinite_; }
    constexpr bool is_finite() const { return !infinite_; }

    /// Finite value; throws if infinite.
    double value() const {
        if (infinite_) throw InvalidArgument("ExtendedReal::value on +inf");
        return value_;
    }

    /// IEEE view (+inf for the infinite branch).
    double as_double() const { return infinite_ ? std::numeric_limits<double>::infinity() : value_; }

    friend ExtendedReal operator+(ExtendedReal a, ExtendedReal b) {
        if (a.infinite_ || b.infinite_) return infinity();
        return {a.value_ + b.value_};
    }

    /// Scaling by a nonnegative factor; 0 * inf is taken as 0 (measure-theoretic convention).
    friend ExtendedReal operator*(double s, ExtendedReal a) {
        if (s < 0.0) throw InvalidArgument("ExtendedReal scaled by a negative factor");
        if (a.infinite_) return s == 0.0 ? ExtendedReal(0.0) : infinity();
        return {s * a.value_};
    }

    friend bool operator<=(ExtendedReal a, ExtendedReal b) {
        if (b.infinite_) return true;
        if (a.infinite_) return false;
        return a.value_ <= b.value_;
    }

    friend bool operator==(ExtendedReal a, ExtendedReal b) {
        if (a.infinite_ || b.infinite_) return a.infinite_ == b.infinite_;
        return a.value_ == b.value_;
    }

    friend std::ostream& operator<<(std::ostream& os, ExtendedReal a) {
        if (a.infinite_) return os << "+inf";
        return os << a.value_;
    }

private:
    double value_ = 0.0;
    bool infinite_ = false;
};

} // namespace bicouple
