// analytics.hpp
//
// Closed-form population moments of the toy pipeline.
//
// With s2 = sigma_x^2, e2 = sigma_eps^2 and the conditional spread
//     cond = ((N-1)/N) * s2/(N*M) + e2/M
// the merged estimate has
//     Var[theta_hat]            = s2/N + cond
//     E[Var[theta_hat | D]]     = cond
//     E[delta_boot_boot^2]      = ((M-1)/M) * cond
//     E[delta_stderr^2]         = cond
// and two distinct members covary by s2/N.  The s2/N term is the Monte
// Carlo statistical (mc-stat) part: no amount of ensemble resampling sees it.

#pragma once

#include <cmath>
#include <utility>

#include "errors.hpp"
#include "toy_model.hpp"

namespace boot2lab {

struct AnalyticMoments {
    double var_boot_avg = 0.0;
    double expected_cond_var = 0.0;
    double expected_delta2_boot_boot = 0.0;
    double expected_delta2_stderr = 0.0;
    double cov_pair = 0.0;
    double var_single = 0.0;
    double mcstat_term = 0.0;
};

[[nodiscard]] inline AnalyticMoments compute_moments(const ToyConfig& config) {
    validate(config);
    const double n = static_cast<double>(config.n);
    const double m = static_cast<double>(config.m);
    const double s2 = config.sigma_x * config.sigma_x;
    const double e2 = config.sigma_eps * config.sigma_eps;
    const double shrink = (n - 1.0) / n;

    AnalyticMoments a;
    a.mcstat_term = s2 / n;
    a.cov_pair = s2 / n;
    a.expected_cond_var = shrink * s2 / (n * m) + e2 / m;
    a.expected_delta2_stderr = a.expected_cond_var;
    a.expected_delta2_boot_boot = ((m - 1.0) / m) * a.expected_cond_var;
    a.var_boot_avg = a.mcstat_term + a.expected_cond_var;
    a.var_single = s2 / n + shrink * s2 / n + e2;
    return a;
}

/// Share of the true variance that the ensemble-spread estimates cannot see.
[[nodiscard]] inline double mcstat_fraction_missed(const AnalyticMoments& moments) {
    if (!(moments.var_boot_avg > 0.0)) throw UndefinedStatistic("total variance is zero; fraction is undefined");
    return moments.mcstat_term / moments.var_boot_avg;
}

/// Expected delta^2 of the two corrected procedures.  These are not taken
/// from the literature; they follow from the law of total variance applied
/// to a pseudo-experiment that resamples D once:
///   plain  (one estimate per pseudo-experiment):   ((N-1)/N) s2/N + e2
///   nested (M-member merge per pseudo-experiment): ((N-1)/N) s2/N + e2/M
/// Both are checked against a brute-force Monte Carlo oracle in the tests.
struct FixVariances {
    double plain = 0.0;
    double nested = 0.0;
};

[[nodiscard]] inline FixVariances expected_fix_variances(const ToyConfig& config) {
    validate(config);
    const double n = static_cast<double>(config.n);
    const double m = static_cast<double>(config.m);
    const double s2 = config.sigma_x * config.sigma_x;
    const double e2 = config.sigma_eps * config.sigma_eps;
    const double resample_part = ((n - 1.0) / n) * s2 / n;
    return {resample_part + e2, resample_part + e2 / m};
}

}  // namespace boot2lab
