// summation.hpp
//
// Error-free transformations and the compensated accumulators built on them.
// Everything is plain IEEE-754 double arithmetic (no FMA), so results are
// bit-identical across compilers that honour -ffp-contract=off.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <cstddef>
#include <cstdint>
#include <span>

#include "errors.hpp"

namespace boot2lab {

struct DoubleDouble {
    double hi = 0.0;
    double lo = 0.0;
};

/// Knuth's TwoSum: a + b == s + err exactly.
[[nodiscard]] inline DoubleDouble two_sum(double a, double b) noexcept {
    const double s = a + b;
    const double bb = s - a;
    const double err = (a - (s - bb)) + (b - bb);
    return {s, err};
}

/// Veltkamp split into two 26-bit halves.
[[nodiscard]] inline DoubleDouble split(double a) noexcept {
    const double t = 134217729.0 * a;  // 2^27 + 1
    const double hi = t - (t - a);
    return {hi, a - hi};
}

/// Dekker's TwoProduct: a * b == p + err exactly (barring overflow).
[[nodiscard]] inline DoubleDouble two_prod(double a, double b) noexcept {
    const double p = a * b;
    const auto [ah, al] = split(a);
    const auto [bh, bl] = split(b);
    const double err = ((ah * bh - p) + ah * bl + al * bh) + al * bl;
    return {p, err};
}

/// Running sum carried as an unevaluated pair hi + lo.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const auto [s, e] = two_sum(hi_, x);
        hi_ = s;
        lo_ += e;
    }

    void add_product(double a, double b) noexcept {
        const auto [p, pe] = two_prod(a, b);
        const auto [s, se] = two_sum(hi_, p);
        hi_ = s;
        lo_ += se + pe;
    }

    /// add_product for an integer-valued `small` below 2^26, whose Veltkamp
    /// split is (small, 0).
    void add_small_int_product(double small, double b) noexcept {
        const double p = small * b;
        const auto [bh, bl] = split(b);
        const double pe = (small * bh - p) + small * bl;
        const auto [s, se] = two_sum(hi_, p);
        hi_ = s;
        lo_ += se + pe;
    }

    void merge(const CompensatedSum& other) noexcept {
        add(other.hi_);
        lo_ += other.lo_;
    }

    [[nodiscard]] double value() const noexcept { return hi_ + lo_; }
    [[nodiscard]] DoubleDouble parts() const noexcept { return {hi_, lo_}; }

    /// (hi + lo) / d with one correction step, so the quotient is accurate
    /// to about one ulp even when hi + lo is not representable.
    [[nodiscard]] double divided_by(double d) const noexcept {
        const auto [hi, lo] = two_sum(hi_, lo_);
        const double q = hi / d;
        const auto [p, pe] = two_prod(q, d);
        const double r = ((hi - p) - pe) + lo;
        return q + r / d;
    }

private:
    double hi_ = 0.0;
    double lo_ = 0.0;
};

[[nodiscard]] inline double compensated_sum(std::span<const double> xs) noexcept {
    CompensatedSum acc;
    for (double x : xs) acc.add(x);
    return acc.value();
}

[[nodiscard]] inline double compensated_mean(std::span<const double> xs) {
    if (xs.empty()) throw InvalidInput("mean of an empty sequence");
    CompensatedSum acc;
    for (double x : xs) acc.add(x);
    return acc.divided_by(static_cast<double>(xs.size()));
}

/// Sample variance with Bessel's correction (divisor n - 1), two-pass.
[[nodiscard]] inline double sample_variance(std::span<const double> xs) {
    if (xs.size() < 2) throw InvalidInput("sample variance needs at least 2 values");
    if (std::adjacent_find(xs.begin(), xs.end(), std::not_equal_to<>{}) == xs.end()) return 0.0;
    const double mean = compensated_mean(xs);
    CompensatedSum acc;
    for (double x : xs) {
        const double d = x - mean;
        acc.add_product(d, d);
    }
    return acc.divided_by(static_cast<double>(xs.size() - 1));
}

/// Sample covariance with Bessel's correction.
[[nodiscard]] inline double sample_covariance(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw InvalidInput("covariance of sequences with different lengths");
    if (xs.size() < 2) throw InvalidInput("sample covariance needs at least 2 pairs");
    const double mx = compensated_mean(xs);
    const double my = compensated_mean(ys);
    CompensatedSum acc;
    for (std::size_t i = 0; i < xs.size(); ++i) acc.add_product(xs[i] - mx, ys[i] - my);
    return acc.divided_by(static_cast<double>(xs.size() - 1));
}

}  // namespace boot2lab
