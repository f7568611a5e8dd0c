// errors.hpp
//
// Exception types shared by every boot2lab module.

#pragma once

#include <stdexcept>
#include <string>

namespace boot2lab {

/// A parameter is outside its domain (negative sd, n = 0, M < 2, ...).
class InvalidParameter : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Input data violates a precondition of the operation (length mismatch,
/// non-positive value under a geometric merge, ...).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A Poisson resample drew zero total weight; the caller must redraw.
class DegenerateResample : public std::runtime_error {
public:
    DegenerateResample() : std::runtime_error("resample has zero total weight") {}
};

/// A ratio or statistic is undefined for the given inputs.
class UndefinedStatistic : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

}  // namespace boot2lab
