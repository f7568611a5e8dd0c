// toy_model.hpp
//
// The Gaussian toy estimation pipeline: a dataset of N draws, an ensemble of
// M bootstrap-resampled noisy means, their merge, the K-fold resampling of
// the ensemble itself, and the two spread-based uncertainty estimates.
//
// Stream layout under a pipeline root SeedSpec:
//   root/0           dataset
//   root/1/m/0       member m resampling
//   root/1/m/1       member m training noise
//   root/2/k         ensemble-resampling trial k

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "sampling.hpp"
#include "summation.hpp"

namespace boot2lab {

enum class MergeMode { arithmetic, geometric };

[[nodiscard]] inline std::string_view to_string(MergeMode mode) noexcept {
    return mode == MergeMode::arithmetic ? "arithmetic" : "geometric";
}

struct ToyConfig {
    double theta = 5.0;
    double sigma_x = 100.0;
    double sigma_eps = 0.01;
    std::size_t n = 1'000'000;
    std::size_t m = 1'000;
    std::size_t k = 10'000;
    MergeMode merge = MergeMode::arithmetic;
    ResampleMode resample = ResampleMode::multinomial;

    /// theta=5, sigma_x=100, sigma_eps=0.01, N=1e6, M=1e3, K=1e4.
    static ToyConfig paper_full() { return {}; }

    /// Same physics at N=1e4, M=20, K=500; every study finishes in seconds.
    static ToyConfig desk_reduced() {
        ToyConfig c;
        c.n = 10'000;
        c.m = 20;
        c.k = 500;
        return c;
    }

    friend bool operator==(const ToyConfig&, const ToyConfig&) = default;
};

/// Throws InvalidParameter naming the first offending field.
inline void validate(const ToyConfig& c) {
    if (!std::isfinite(c.theta)) throw InvalidParameter("theta must be finite");
    if (!std::isfinite(c.sigma_x) || c.sigma_x < 0.0) throw InvalidParameter("sigma_x must be finite and ≥ 0");
    if (!std::isfinite(c.sigma_eps) || c.sigma_eps < 0.0)
        throw InvalidParameter("sigma_eps must be finite and ≥ 0");
    if (c.n < 2) throw InvalidParameter("n must be ≥ 2");
    if (c.m < 1) throw InvalidParameter("m must be ≥ 1");
    if (c.k < 2) throw InvalidParameter("k must be ≥ 2");
    if (c.merge == MergeMode::geometric && c.theta <= 0.0)
        throw InvalidParameter("theta must be > 0 for the geometric merge");
}

struct Dataset {
    std::vector<double> values;
};

struct Ensemble {
    std::vector<double> estimates;
    std::uint64_t poisson_redraws = 0;
};

struct UncertaintyPair {
    double delta_boot_boot = 0.0;
    double delta_stderr = 0.0;
    bool bias_corrected = false;
};

struct MemberEstimate {
    double value = 0.0;
    std::uint32_t redraws = 0;
};

[[nodiscard]] inline Dataset generate_dataset(const ToyConfig& config, Rng& rng) {
    validate(config);
    return Dataset{sample_gaussian(rng, config.theta, config.sigma_x, config.n)};
}

/// Bootstrap-resample mean of `data` plus one N(0, sigma_eps^2) draw.  An
/// all-zero Poisson resample is redrawn from the same stream.
[[nodiscard]] inline MemberEstimate boot_member_estimate(std::span<const double> data, double sigma_eps,
                                                         ResampleMode mode, Rng& resample_rng, Rng& noise_rng,
                                                         ResampleCounts& scratch) {
    if (data.empty()) throw InvalidInput("dataset is empty");
    if (!std::isfinite(sigma_eps) || sigma_eps < 0.0) throw InvalidParameter("sigma_eps must be finite and ≥ 0");
    MemberEstimate est;
    for (;;) {
        bootstrap_counts_into(resample_rng, data.size(), mode, scratch);
        if (scratch.total > 0) break;
        ++est.redraws;
    }
    est.value = weighted_mean(data, scratch);
    if (sigma_eps > 0.0) est.value += sigma_eps * standard_normal(noise_rng);
    return est;
}

/// Convenience form: resampling and noise come from member/0 and member/1.
[[nodiscard]] inline MemberEstimate boot_member_estimate(std::span<const double> data, double sigma_eps,
                                                         ResampleMode mode, const SeedSpec& member) {
    Rng resample_rng = derive_rng(member.child(0));
    Rng noise_rng = derive_rng(member.child(1));
    ResampleCounts scratch;
    return boot_member_estimate(data, sigma_eps, mode, resample_rng, noise_rng, scratch);
}

namespace detail {

inline ResampleCounts& thread_scratch() {
    thread_local ResampleCounts scratch;
    return scratch;
}

inline MemberEstimate member_from_stream(std::span<const double> data, double sigma_eps, ResampleMode mode,
                                         const SeedSpec& member) {
    Rng resample_rng = derive_rng(member.child(0));
    Rng noise_rng = derive_rng(member.child(1));
    return boot_member_estimate(data, sigma_eps, mode, resample_rng, noise_rng, thread_scratch());
}

}  // namespace detail

/// First `count` members of the ensemble rooted at `ensemble_stream`
/// (member m reads ensemble_stream/m).  Any prefix agrees with the full build.
[[nodiscard]] inline Ensemble build_ensemble_prefix(std::span<const double> data, const ToyConfig& config,
                                                    const SeedSpec& ensemble_stream, std::size_t count,
                                                    unsigned workers = 1) {
    std::vector<MemberEstimate> members(count);
    parallel_for(count, workers, [&](std::size_t m) {
        members[m] = detail::member_from_stream(data, config.sigma_eps, config.resample, ensemble_stream.child(m));
    });
    Ensemble e;
    e.estimates.reserve(count);
    for (const auto& mem : members) {
        e.estimates.push_back(mem.value);
        e.poisson_redraws += mem.redraws;
    }
    return e;
}

[[nodiscard]] inline Ensemble build_ensemble(const Dataset& dataset, const ToyConfig& config,
                                             const SeedSpec& ensemble_stream, unsigned workers = 1) {
    validate(config);
    return build_ensemble_prefix(dataset.values, config, ensemble_stream, config.m, workers);
}

[[nodiscard]] inline double merge(std::span<const double> estimates, MergeMode mode) {
    if (estimates.empty()) throw InvalidInput("cannot merge an empty ensemble");
    if (mode == MergeMode::arithmetic) return compensated_mean(estimates);
    if (estimates.front() > 0.0 &&
        std::adjacent_find(estimates.begin(), estimates.end(), std::not_equal_to<>{}) == estimates.end())
        return estimates.front();
    CompensatedSum logs;
    for (double e : estimates) {
        if (!(e > 0.0)) throw InvalidInput("geometric merge needs every estimate > 0");
        logs.add(std::log(e));
    }
    return std::exp(logs.divided_by(static_cast<double>(estimates.size())));
}

/// K merges of size-M resamples (with replacement) of the ensemble.  Only
/// the M scalar estimates are resampled; the dataset is never revisited.
[[nodiscard]] inline std::vector<double> double_bootstrap(std::span<const double> estimates, std::size_t k,
                                                          MergeMode mode, const SeedSpec& stream,
                                                          unsigned workers = 1) {
    if (estimates.empty()) throw InvalidInput("cannot resample an empty ensemble");
    if (k < 1) throw InvalidParameter("k must be ≥ 1");
    const std::size_t m = estimates.size();

    std::vector<double> source(estimates.begin(), estimates.end());
    if (mode == MergeMode::geometric) {
        for (double& e : source) {
            if (!(e > 0.0)) throw InvalidInput("geometric merge needs every estimate > 0");
            e = std::log(e);
        }
    }

    std::vector<double> out(k);
    parallel_for(k, workers, [&](std::size_t trial) {
        Rng rng = derive_rng(stream.child(trial));
        CompensatedSum acc;
        for (std::size_t j = 0; j < m; ++j) acc.add(source[rng.below(m)]);
        const double avg = acc.divided_by(static_cast<double>(m));
        out[trial] = mode == MergeMode::arithmetic ? avg : std::exp(avg);
    });
    return out;
}

/// Sample sd (Bessel over K) of the resampled merges.  With bias_correct the
/// variance is scaled by M/(M-1) first; M = 1 is left uncorrected since its
/// spread is identically zero.
[[nodiscard]] inline double delta_boot_boot(std::span<const double> resampled_merges, bool bias_correct = false,
                                            std::size_t m = 0) {
    if (resampled_merges.size() < 2) throw InvalidInput("delta_boot_boot needs at least 2 resampled merges");
    double var = sample_variance(resampled_merges);
    if (bias_correct && m >= 2) var *= static_cast<double>(m) / static_cast<double>(m - 1);
    return std::sqrt(var);
}

/// sqrt(SVar(ensemble) / M).
[[nodiscard]] inline double delta_stderr_formula(std::span<const double> estimates) {
    if (estimates.size() < 2) throw InvalidInput("delta_stderr_formula needs M ≥ 2");
    return std::sqrt(sample_variance(estimates) / static_cast<double>(estimates.size()));
}

}  // namespace boot2lab
