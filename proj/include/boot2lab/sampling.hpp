// sampling.hpp
//
// Gaussian draws, bootstrap resample counts and weighted means.
//
// A bootstrap replica is never materialised as an index list: it is a
// length-N vector of multiplicities, and the replica's mean is a single
// compensated dot product against the original values.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"
#include "summation.hpp"

namespace boot2lab {

/// How a bootstrap replica is drawn.  `none` keeps every datapoint exactly
/// once; it exists so the resampling channel can be switched off in
/// diagnostics and is not offered on the command line.
enum class ResampleMode { multinomial, poisson, none };

[[nodiscard]] inline std::string_view to_string(ResampleMode mode) noexcept {
    switch (mode) {
        case ResampleMode::multinomial: return "multinomial";
        case ResampleMode::poisson: return "poisson";
        case ResampleMode::none: return "none";
    }
    return "?";
}

struct ResampleCounts {
    std::vector<std::uint32_t> counts;
    std::uint64_t total = 0;
};

/// One standard normal deviate (Marsaglia polar method, spare discarded).
[[nodiscard]] inline double standard_normal(Rng& rng) noexcept {
    double u, v, s;
    do {
        u = 2.0 * rng.uniform() - 1.0;
        v = 2.0 * rng.uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    return u * std::sqrt(-2.0 * std::log(s) / s);
}

/// n iid N(mean, sd^2) draws.  sd == 0 yields the constant vector without
/// consuming the stream.
[[nodiscard]] inline std::vector<double> sample_gaussian(Rng& rng, double mean, double sd, std::size_t n) {
    if (!(sd >= 0.0) || !std::isfinite(sd)) throw InvalidParameter("sd must be finite and >= 0");
    if (!std::isfinite(mean)) throw InvalidParameter("mean must be finite");
    std::vector<double> out(n, mean);
    if (sd == 0.0) return out;
    std::size_t i = 0;
    while (i < n) {
        double u, v, s;
        do {
            u = 2.0 * rng.uniform() - 1.0;
            v = 2.0 * rng.uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        out[i++] = mean + sd * (u * f);
        if (i < n) out[i++] = mean + sd * (v * f);
    }
    return out;
}

/// Poisson(1) by sequential inversion.
[[nodiscard]] inline std::uint32_t poisson_unit(Rng& rng) noexcept {
    constexpr double kExpMinusOne = 0.36787944117144233;
    const double u = rng.uniform();
    std::uint32_t k = 0;
    double p = kExpMinusOne;
    double cdf = p;
    while (u >= cdf && k < 64) {
        ++k;
        p /= k;
        cdf += p;
    }
    return k;
}

/// Refills `out` in place; buffers are reused across replicas.
inline void bootstrap_counts_into(Rng& rng, std::size_t n, ResampleMode mode, ResampleCounts& out) {
    if (n == 0) throw InvalidParameter("n must be >= 1 for a bootstrap resample");
    out.counts.assign(n, 0);
    switch (mode) {
        case ResampleMode::multinomial: {
            auto* c = out.counts.data();
            for (std::size_t i = 0; i < n; ++i) ++c[rng.below(n)];
            out.total = n;
            break;
        }
        case ResampleMode::poisson: {
            std::uint64_t total = 0;
            for (auto& c : out.counts) {
                c = poisson_unit(rng);
                total += c;
            }
            out.total = total;
            break;
        }
        case ResampleMode::none:
            std::fill(out.counts.begin(), out.counts.end(), 1u);
            out.total = n;
            break;
    }
}

[[nodiscard]] inline ResampleCounts bootstrap_counts(Rng& rng, std::size_t n, ResampleMode mode) {
    ResampleCounts out;
    bootstrap_counts_into(rng, n, mode, out);
    return out;
}

/// sum(c_i x_i) / sum(c_i), accumulated with TwoProduct/TwoSum in eight
/// fixed lanes.  Lane assignment depends only on the index, so the result is
/// deterministic.
[[nodiscard]] inline double weighted_mean(std::span<const double> values, const ResampleCounts& counts) {
    if (values.size() != counts.counts.size())
        throw InvalidInput("values and counts must have equal length");
    if (counts.total == 0) throw DegenerateResample();

    constexpr std::size_t kLanes = 8;
    std::array<CompensatedSum, kLanes> lanes{};
    const std::size_t n = values.size();
    const std::uint32_t* c = counts.counts.data();
    const double* x = values.data();
    // Every count is at most total, so below 2^26 the cheap product applies.
    const bool small_counts = counts.total < (std::uint64_t{1} << 26);
    std::size_t i = 0;
    if (small_counts) {
        for (; i + kLanes <= n; i += kLanes)
            for (std::size_t l = 0; l < kLanes; ++l)
                lanes[l].add_small_int_product(static_cast<double>(c[i + l]), x[i + l]);
    } else {
        for (; i + kLanes <= n; i += kLanes)
            for (std::size_t l = 0; l < kLanes; ++l)
                lanes[l].add_product(static_cast<double>(c[i + l]), x[i + l]);
    }
    for (; i < n; ++i) lanes[i % kLanes].add_product(static_cast<double>(c[i]), x[i]);

    CompensatedSum total = lanes[0];
    for (std::size_t l = 1; l < kLanes; ++l) total.merge(lanes[l]);
    return total.divided_by(static_cast<double>(counts.total));
}

}  // namespace boot2lab
