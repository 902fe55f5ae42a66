#pragma once

#include <cmath>
#include <optional>
#include <ostream>
#include <string>

#include "plap/errors.hpp"

namespace plap {

/// Tag for the point at infinity of the extended half-line.
struct Infinity {};
inline constexpr Infinity infinity{};

/// A positive exponent that may be +infinity. Infinity is a distinct state,
/// never an IEEE sentinel; reciprocals of infinity are exactly zero.
class ExtendedReal {
public:
    constexpr ExtendedReal(Infinity) noexcept {}
    ExtendedReal(double finite) : value_(finite) {
        if (!std::isfinite(finite)) {
            throw DomainError("ExtendedReal: finite value required, use plap::infinity");
        }
    }

    constexpr bool is_infinite() const noexcept { return !value_.has_value(); }
    constexpr bool is_finite() const noexcept { return value_.has_value(); }

    double value() const {
        if (!value_) throw DomainError("ExtendedReal: value() of infinity");
        return *value_;
    }

    /// c / x, with c / infinity = 0.
    double divide(double numerator) const noexcept {
        return value_ ? numerator / *value_ : 0.0;
    }
    double reciprocal() const noexcept { return divide(1.0); }

    /// Strict order on the extended line; infinity compares above any finite value.
    bool greater_than(double x) const noexcept { return !value_ || *value_ > x; }
    bool less_than(double x) const noexcept { return value_ && *value_ < x; }

    std::string to_string() const {
        if (!value_) return "inf";
        return std::to_string(*value_);
    }

    friend bool operator==(const ExtendedReal& a, const ExtendedReal& b) noexcept {
        return a.value_ == b.value_;
    }

    friend std::ostream& operator<<(std::ostream& os, const ExtendedReal& x) {
        if (x.is_infinite()) return os << "inf";
        return os << *x.value_;
    }

private:
    std::optional<double> value_;
};

}  // namespace plap
