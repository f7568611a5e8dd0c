// harness.hpp
//
// Monte Carlo replication studies over the toy pipeline.
//
// Replication i of a study seeded with S runs under the root SeedSpec
// (S, [i]) and uses the stream layout documented in toy_model.hpp, plus
//   root/3/j/{0,1,2}  pseudo-experiment j: resampling, fix-1 noise, fix-2 noise
//   root/4/{0,1}      fix-1 / fix-2 noise on the original dataset
// Results land in per-replication slots and are reduced in index order, so
// every summary is independent of the worker count.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "analytics.hpp"
#include "errors.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "sampling.hpp"
#include "summation.hpp"
#include "toy_model.hpp"

namespace boot2lab {

/// A single replication is split across members instead of replications
/// once N * M reaches this many resample draws.
inline constexpr double kMemberParallelWorkThreshold = 1e7;

struct StudyOptions {
    bool bias_correct = false;
    unsigned workers = 0;  // 0: BOOT2LAB_WORKERS or hardware concurrency
};

struct ExperimentReport {
    double theta_hat = 0.0;
    double delta_boot_boot = 0.0;
    double delta_stderr = 0.0;  // NaN when M = 1
    double z_flawed = 0.0;
    double z_true = 0.0;
    AnalyticMoments analytic;
    double runtime_seconds = 0.0;
    SeedSpec seed;
    ToyConfig config;
    bool bias_corrected = false;
    std::uint64_t poisson_redraws = 0;
};

/// An estimate together with its standard error.
struct Measured {
    double value = 0.0;
    double se = 0.0;
};

struct ReplicationSummary {
    std::size_t r = 0;
    Measured mean_theta_hat;
    Measured empirical_var_theta_hat;
    Measured mean_delta2_boot_boot;
    Measured mean_delta2_stderr;
    Measured empirical_cov_pair;
    std::optional<Measured> empirical_cond_var;
    Measured coverage_flawed;
    Measured coverage_stderr;
    Measured coverage_true;
    std::optional<std::pair<Measured, Measured>> coverage_fixes;
    double median_z_flawed = 0.0;
    double median_z_true = 0.0;
    double ratio_stderr_to_boot_boot = 0.0;
    AnalyticMoments analytic;
};

struct ConditionalResult {
    double cond_var = 0.0;
    double cond_mean = 0.0;
    double member_corr = 0.0;  // NaN when M = 1
    std::size_t r_inner = 0;
};

struct ConditionalStudy {
    std::size_t datasets = 0;
    std::size_t r_inner = 0;
    Measured mean_cond_var;
    Measured mcstat;  // variance of per-dataset conditional means, inner noise removed
    double mean_member_corr = 0.0;
    double max_abs_member_corr = 0.0;
    std::vector<ConditionalResult> per_dataset;
    AnalyticMoments analytic;
};

struct DependenceResult {
    std::size_t r = 0;
    Measured cov_pair;
    double corr_pair = 0.0;
    double expected_cov_pair = 0.0;
};

struct ScalingRow {
    std::size_t m = 0;
    Measured mean_delta_boot_boot;
    double expected_delta_boot_boot = 0.0;  // sqrt of the closed-form E[delta^2]
};

struct ScalingResult {
    std::vector<ScalingRow> rows;
    double slope = 0.0;
    std::size_t r = 0;
};

struct FixesResult {
    std::size_t r = 0;
    std::size_t b = 0;
    Measured mean_delta2_plain;
    Measured mean_delta2_nested;
    Measured coverage_plain;
    Measured coverage_nested;
    double true_sd_plain = 0.0;
    double true_sd_nested = 0.0;
    double ratio_plain = 0.0;   // mean delta / true sd
    double ratio_nested = 0.0;
    Measured empirical_var_plain;
    Measured empirical_var_nested;
    FixVariances expected;
};

namespace detail {

inline double mean_of(std::span<const double> xs) { return compensated_mean(xs); }

inline Measured measured_mean(std::span<const double> xs) {
    const double mean = compensated_mean(xs);
    const double se = xs.size() >= 2 ? std::sqrt(sample_variance(xs) / static_cast<double>(xs.size())) : 0.0;
    return {mean, se};
}

/// Sample variance with the large-sample standard error
/// sqrt((m4 - s^4 (r-3)/(r-1)) / r).
inline Measured measured_variance(std::span<const double> xs) {
    const double var = sample_variance(xs);
    const double mean = compensated_mean(xs);
    const double r = static_cast<double>(xs.size());
    CompensatedSum m4;
    for (double x : xs) {
        const double d2 = (x - mean) * (x - mean);
        m4.add_product(d2, d2);
    }
    const double m4v = m4.divided_by(r);
    const double se2 = (m4v - var * var * (r - 3.0) / (r - 1.0)) / r;
    return {var, std::sqrt(std::max(se2, 0.0))};
}

inline Measured measured_covariance(std::span<const double> xs, std::span<const double> ys) {
    const double cov = sample_covariance(xs, ys);
    const double mx = compensated_mean(xs);
    const double my = compensated_mean(ys);
    std::vector<double> prods(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) prods[i] = (xs[i] - mx) * (ys[i] - my);
    const double se = std::sqrt(sample_variance(prods) / static_cast<double>(xs.size()));
    return {cov, se};
}

inline Measured measured_fraction(const std::vector<char>& hits) {
    std::size_t count = 0;
    for (char h : hits) count += h ? 1 : 0;
    const double r = static_cast<double>(hits.size());
    const double p = static_cast<double>(count) / r;
    return {p, std::sqrt(p * (1.0 - p) / r)};
}

inline double median_of(std::vector<double> xs) {
    if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(xs.begin(), xs.end());
    const std::size_t h = xs.size() / 2;
    return xs.size() % 2 ? xs[h] : 0.5 * (xs[h - 1] + xs[h]);
}

/// |err| / width; a zero-width interval yields 0 for a zero error, +inf otherwise.
inline double z_score(double err, double width) {
    const double a = std::abs(err);
    if (width > 0.0) return a / width;
    return a == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

/// Covered iff |err| <= width; a zero-width interval covers only a zero error.
inline bool covers(double err, double width) { return std::abs(err) <= width; }

struct Workers {
    unsigned outer = 1;
    unsigned inner = 1;
};

inline Workers split_workers(const ToyConfig& c, std::size_t replications, unsigned requested) {
    const unsigned w = resolve_workers(requested);
    const double work = static_cast<double>(c.n) * static_cast<double>(c.m);
    if (replications >= w || work < kMemberParallelWorkThreshold) return {w, 1};
    return {1, w};
}

struct PipelineOutcome {
    double theta_hat = 0.0;
    double delta_boot_boot = 0.0;
    double delta_stderr = std::numeric_limits<double>::quiet_NaN();
    double member0 = 0.0;
    double member1 = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t poisson_redraws = 0;
};

/// generate_dataset -> build_ensemble -> merge -> double_bootstrap -> deltas.
inline PipelineOutcome run_pipeline(const ToyConfig& config, const SeedSpec& root, bool bias_correct,
                                    unsigned workers) {
    Rng data_rng = derive_rng(root.child(0));
    const Dataset dataset = generate_dataset(config, data_rng);
    const Ensemble ensemble = build_ensemble(dataset, config, root.child(1), workers);

    PipelineOutcome out;
    out.theta_hat = merge(ensemble.estimates, config.merge);
    const auto resampled = double_bootstrap(ensemble.estimates, config.k, config.merge, root.child(2), workers);
    out.delta_boot_boot = delta_boot_boot(resampled, bias_correct, config.m);
    if (config.m >= 2) {
        out.delta_stderr = delta_stderr_formula(ensemble.estimates);
        out.member1 = ensemble.estimates[1];
    }
    out.member0 = ensemble.estimates[0];
    out.poisson_redraws = ensemble.poisson_redraws;
    return out;
}

inline ConditionalResult run_conditional_at(const ToyConfig& config, std::size_t r_inner, const SeedSpec& root,
                                            unsigned workers) {
    validate(config);
    if (r_inner < 2) throw InvalidParameter("r_inner must be ≥ 2");
    Rng data_rng = derive_rng(root.child(0));
    const Dataset dataset = generate_dataset(config, data_rng);

    std::vector<double> merged(r_inner);
    std::vector<double> first(r_inner);
    std::vector<double> second(r_inner);
    parallel_for(r_inner, workers, [&](std::size_t j) {
        const Ensemble e = build_ensemble(dataset, config, root.child(1).child(j), 1);
        merged[j] = merge(e.estimates, config.merge);
        first[j] = e.estimates[0];
        second[j] = config.m >= 2 ? e.estimates[1] : 0.0;
    });

    ConditionalResult res;
    res.r_inner = r_inner;
    res.cond_var = sample_variance(merged);
    res.cond_mean = compensated_mean(merged);
    res.member_corr = std::numeric_limits<double>::quiet_NaN();
    if (config.m >= 2) {
        const double vx = sample_variance(first);
        const double vy = sample_variance(second);
        res.member_corr = (vx > 0.0 && vy > 0.0) ? sample_covariance(first, second) / std::sqrt(vx * vy) : 0.0;
    }
    return res;
}

}  // namespace detail

[[nodiscard]] inline ExperimentReport run_single(const ToyConfig& config, std::uint64_t seed,
                                                 const StudyOptions& options = {}) {
    validate(config);
    const auto start = std::chrono::steady_clock::now();
    const SeedSpec root(seed);
    const auto out = detail::run_pipeline(config, root, options.bias_correct, resolve_workers(options.workers));

    ExperimentReport rep;
    rep.config = config;
    rep.seed = root;
    rep.bias_corrected = options.bias_correct;
    rep.analytic = compute_moments(config);
    rep.theta_hat = out.theta_hat;
    rep.delta_boot_boot = out.delta_boot_boot;
    rep.delta_stderr = out.delta_stderr;
    rep.poisson_redraws = out.poisson_redraws;
    const double err = out.theta_hat - config.theta;
    rep.z_flawed = detail::z_score(err, out.delta_boot_boot);
    rep.z_true = detail::z_score(err, std::sqrt(rep.analytic.var_boot_avg));
    rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

/// r independent end-to-end replications, each with a fresh dataset.
[[nodiscard]] inline ReplicationSummary run_replicated(const ToyConfig& config, std::size_t r, std::uint64_t seed,
                                                       const StudyOptions& options = {}) {
    validate(config);
    if (r < 2) throw InvalidParameter("r must be ≥ 2");
    const auto workers = detail::split_workers(config, r, options.workers);

    std::vector<detail::PipelineOutcome> outcomes(r);
    parallel_for(r, workers.outer, [&](std::size_t i) {
        outcomes[i] = detail::run_pipeline(config, SeedSpec(seed, {i}), options.bias_correct, workers.inner);
    });

    ReplicationSummary s;
    s.r = r;
    s.analytic = compute_moments(config);
    const double true_sd = std::sqrt(s.analytic.var_boot_avg);

    std::vector<double> theta(r), d2bb(r), d2se(r), m0(r), m1(r), zf(r), zt(r);
    std::vector<char> cov_f(r), cov_s(r), cov_t(r);
    for (std::size_t i = 0; i < r; ++i) {
        const auto& o = outcomes[i];
        const double err = o.theta_hat - config.theta;
        theta[i] = o.theta_hat;
        d2bb[i] = o.delta_boot_boot * o.delta_boot_boot;
        d2se[i] = o.delta_stderr * o.delta_stderr;
        m0[i] = o.member0;
        m1[i] = o.member1;
        zf[i] = detail::z_score(err, o.delta_boot_boot);
        zt[i] = detail::z_score(err, true_sd);
        cov_f[i] = detail::covers(err, o.delta_boot_boot);
        cov_s[i] = config.m >= 2 && detail::covers(err, o.delta_stderr);
        cov_t[i] = detail::covers(err, true_sd);
    }
    s.mean_theta_hat = detail::measured_mean(theta);
    s.empirical_var_theta_hat = detail::measured_variance(theta);
    s.mean_delta2_boot_boot = detail::measured_mean(d2bb);
    s.coverage_flawed = detail::measured_fraction(cov_f);
    s.coverage_true = detail::measured_fraction(cov_t);
    s.median_z_flawed = detail::median_of(zf);
    s.median_z_true = detail::median_of(zt);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (config.m >= 2) {
        s.mean_delta2_stderr = detail::measured_mean(d2se);
        s.coverage_stderr = detail::measured_fraction(cov_s);
        s.empirical_cov_pair = detail::measured_covariance(m0, m1);
        s.ratio_stderr_to_boot_boot = s.mean_delta2_boot_boot.value > 0.0
                                          ? s.mean_delta2_stderr.value / s.mean_delta2_boot_boot.value
                                          : nan;
    } else {
        s.mean_delta2_stderr = {nan, nan};
        s.coverage_stderr = {nan, nan};
        s.empirical_cov_pair = {nan, nan};
        s.ratio_stderr_to_boot_boot = nan;
    }
    return s;
}

/// One dataset, r_inner independent ensemble builds and merges on it.
[[nodiscard]] inline ConditionalResult run_conditional(const ToyConfig& config, std::size_t r_inner,
                                                       std::uint64_t seed, const StudyOptions& options = {}) {
    return detail::run_conditional_at(config, r_inner, SeedSpec(seed), resolve_workers(options.workers));
}

/// run_conditional over `datasets` independent datasets; estimates
/// E[Var[theta_hat | D]] and, from the spread of the conditional means,
/// the mc-stat term Var[E[theta_hat | D]].
[[nodiscard]] inline ConditionalStudy run_conditional_study(const ToyConfig& config, std::size_t datasets,
                                                            std::size_t r_inner, std::uint64_t seed,
                                                            const StudyOptions& options = {}) {
    validate(config);
    if (datasets < 2) throw InvalidParameter("datasets must be ≥ 2");
    const unsigned w = resolve_workers(options.workers);

    ConditionalStudy st;
    st.datasets = datasets;
    st.r_inner = r_inner;
    st.analytic = compute_moments(config);
    st.per_dataset.reserve(datasets);
    for (std::size_t d = 0; d < datasets; ++d)
        st.per_dataset.push_back(detail::run_conditional_at(config, r_inner, SeedSpec(seed, {d}), w));

    std::vector<double> vars, means;
    CompensatedSum corr;
    for (const auto& c : st.per_dataset) {
        vars.push_back(c.cond_var);
        means.push_back(c.cond_mean);
        if (config.m >= 2) {
            corr.add(c.member_corr);
            st.max_abs_member_corr = std::max(st.max_abs_member_corr, std::abs(c.member_corr));
        }
    }
    st.mean_cond_var = detail::measured_mean(vars);
    const auto between = detail::measured_variance(means);
    // Each conditional mean carries cond_var / r_inner of inner noise.
    st.mcstat = {between.value - st.mean_cond_var.value / static_cast<double>(r_inner), between.se};
    st.mean_member_corr = config.m >= 2 ? corr.divided_by(static_cast<double>(datasets))
                                        : std::numeric_limits<double>::quiet_NaN();
    return st;
}

/// Sample covariance of members 0 and 1 across r fresh datasets.
[[nodiscard]] inline DependenceResult run_dependence_study(const ToyConfig& config, std::size_t r,
                                                           std::uint64_t seed, const StudyOptions& options = {}) {
    validate(config);
    if (r < 2) throw InvalidParameter("r must be ≥ 2");
    if (config.m < 2) throw InvalidParameter("m must be ≥ 2 for a member-pair study");

    std::vector<double> first(r), second(r);
    parallel_for(r, resolve_workers(options.workers), [&](std::size_t i) {
        const SeedSpec root(seed, {i});
        Rng data_rng = derive_rng(root.child(0));
        const Dataset dataset = generate_dataset(config, data_rng);
        const Ensemble pair = build_ensemble_prefix(dataset.values, config, root.child(1), 2, 1);
        first[i] = pair.estimates[0];
        second[i] = pair.estimates[1];
    });

    DependenceResult res;
    res.r = r;
    res.cov_pair = detail::measured_covariance(first, second);
    const double vx = sample_variance(first);
    const double vy = sample_variance(second);
    res.corr_pair = (vx > 0.0 && vy > 0.0) ? res.cov_pair.value / std::sqrt(vx * vy) : 0.0;
    res.expected_cov_pair = compute_moments(config).cov_pair;
    return res;
}

/// Mean delta_boot_boot against M.  Each replication builds one ensemble of
/// max(m_values) members and evaluates every M on its prefix.
[[nodiscard]] inline ScalingResult run_scaling_study(const ToyConfig& config, std::span<const std::size_t> m_values,
                                                     std::size_t r, std::uint64_t seed,
                                                     const StudyOptions& options = {}) {
    validate(config);
    if (m_values.empty()) throw InvalidParameter("m_values must not be empty");
    if (r < 1) throw InvalidParameter("r must be ≥ 1");
    for (auto mv : m_values)
        if (mv < 2) throw InvalidParameter("every m in m_values must be ≥ 2");
    const std::size_t m_max = *std::max_element(m_values.begin(), m_values.end());
    ToyConfig big = config;
    big.m = m_max;
    const auto workers = detail::split_workers(big, r, options.workers);

    std::vector<std::vector<double>> deltas(r, std::vector<double>(m_values.size()));
    parallel_for(r, workers.outer, [&](std::size_t i) {
        const SeedSpec root(seed, {i});
        Rng data_rng = derive_rng(root.child(0));
        const Dataset dataset = generate_dataset(big, data_rng);
        const Ensemble e = build_ensemble(dataset, big, root.child(1), workers.inner);
        for (std::size_t j = 0; j < m_values.size(); ++j) {
            const std::span<const double> prefix(e.estimates.data(), m_values[j]);
            const auto resampled = double_bootstrap(prefix, config.k, config.merge, root.child(2).child(j), 1);
            deltas[i][j] = delta_boot_boot(resampled, options.bias_correct, m_values[j]);
        }
    });

    ScalingResult res;
    res.r = r;
    std::vector<double> lx, ly;
    for (std::size_t j = 0; j < m_values.size(); ++j) {
        std::vector<double> col(r);
        for (std::size_t i = 0; i < r; ++i) col[i] = deltas[i][j];
        ScalingRow row;
        row.m = m_values[j];
        row.mean_delta_boot_boot = r >= 2 ? detail::measured_mean(col) : Measured{col[0], 0.0};
        ToyConfig at = config;
        at.m = m_values[j];
        double expected = compute_moments(at).expected_delta2_boot_boot;
        if (options.bias_correct) expected *= static_cast<double>(at.m) / static_cast<double>(at.m - 1);
        row.expected_delta_boot_boot = std::sqrt(expected);
        res.rows.push_back(row);
        lx.push_back(std::log(static_cast<double>(row.m)));
        ly.push_back(std::log(row.mean_delta_boot_boot.value));
    }
    // Least-squares slope of log(delta) on log(M); undefined with fewer than
    // two distinct M or when every delta is zero.
    res.slope = std::numeric_limits<double>::quiet_NaN();
    if (lx.size() >= 2) {
        const double vx = sample_variance(lx);
        const bool finite = std::all_of(ly.begin(), ly.end(), [](double v) { return std::isfinite(v); });
        if (vx > 0.0 && finite) res.slope = sample_covariance(lx, ly) / vx;
    }
    return res;
}

/// The two corrected procedures, each repeated over r fresh datasets.
///   plain:  one estimate mean(D) + eps; delta is the sd over b pseudo-
///           experiments, each resampling D once with fresh eps.
///   nested: merge of M estimates mean(D) + eps_m (members see the original
///           data, no resampling); each pseudo-experiment resamples D once and
///           repeats the whole M-member build and merge.
[[nodiscard]] inline FixesResult run_fixes_study(const ToyConfig& config, std::size_t b, std::size_t r,
                                                 std::uint64_t seed, const StudyOptions& options = {}) {
    validate(config);
    if (b < 2) throw InvalidParameter("b must be ≥ 2");
    if (r < 2) throw InvalidParameter("r must be ≥ 2");
    const std::size_t m = config.m;

    struct Rep {
        double point_plain, point_nested, delta_plain, delta_nested;
    };
    std::vector<Rep> reps(r);

    auto noise_mean = [&](Rng& rng) {
        if (config.sigma_eps == 0.0) return 0.0;
        CompensatedSum acc;
        for (std::size_t j = 0; j < m; ++j) acc.add(config.sigma_eps * standard_normal(rng));
        return acc.divided_by(static_cast<double>(m));
    };
    auto noise_one = [&](Rng& rng) { return config.sigma_eps == 0.0 ? 0.0 : config.sigma_eps * standard_normal(rng); };

    parallel_for(r, resolve_workers(options.workers), [&](std::size_t i) {
        const SeedSpec root(seed, {i});
        Rng data_rng = derive_rng(root.child(0));
        const Dataset dataset = generate_dataset(config, data_rng);
        const double data_mean = compensated_mean(dataset.values);

        Rng plain_rng = derive_rng(root.child(4).child(0));
        Rng nested_rng = derive_rng(root.child(4).child(1));
        Rep rep{};
        rep.point_plain = data_mean + noise_one(plain_rng);
        rep.point_nested = data_mean + noise_mean(nested_rng);

        std::vector<double> plain(b), nested(b);
        ResampleCounts& scratch = detail::thread_scratch();
        for (std::size_t j = 0; j < b; ++j) {
            const SeedSpec pe = root.child(3).child(j);
            Rng resample_rng = derive_rng(pe.child(0));
            do {
                bootstrap_counts_into(resample_rng, dataset.values.size(), config.resample, scratch);
            } while (scratch.total == 0);
            const double resampled_mean = weighted_mean(dataset.values, scratch);
            Rng r1 = derive_rng(pe.child(1));
            Rng r2 = derive_rng(pe.child(2));
            plain[j] = resampled_mean + noise_one(r1);
            nested[j] = resampled_mean + noise_mean(r2);
        }
        rep.delta_plain = std::sqrt(sample_variance(plain));
        rep.delta_nested = std::sqrt(sample_variance(nested));
        reps[i] = rep;
    });

    FixesResult res;
    res.r = r;
    res.b = b;
    res.expected = expected_fix_variances(config);
    const double n = static_cast<double>(config.n);
    const double s2 = config.sigma_x * config.sigma_x;
    const double e2 = config.sigma_eps * config.sigma_eps;
    res.true_sd_plain = std::sqrt(s2 / n + e2);
    res.true_sd_nested = std::sqrt(s2 / n + e2 / static_cast<double>(m));

    std::vector<double> d2p(r), d2n(r), dp(r), dn(r), pp(r), pn(r);
    std::vector<char> cp(r), cn(r);
    for (std::size_t i = 0; i < r; ++i) {
        const auto& rep = reps[i];
        d2p[i] = rep.delta_plain * rep.delta_plain;
        d2n[i] = rep.delta_nested * rep.delta_nested;
        dp[i] = rep.delta_plain;
        dn[i] = rep.delta_nested;
        pp[i] = rep.point_plain;
        pn[i] = rep.point_nested;
        cp[i] = detail::covers(rep.point_plain - config.theta, rep.delta_plain);
        cn[i] = detail::covers(rep.point_nested - config.theta, rep.delta_nested);
    }
    res.mean_delta2_plain = detail::measured_mean(d2p);
    res.mean_delta2_nested = detail::measured_mean(d2n);
    res.coverage_plain = detail::measured_fraction(cp);
    res.coverage_nested = detail::measured_fraction(cn);
    res.empirical_var_plain = detail::measured_variance(pp);
    res.empirical_var_nested = detail::measured_variance(pn);
    res.ratio_plain = res.true_sd_plain > 0.0 ? compensated_mean(dp) / res.true_sd_plain : 0.0;
    res.ratio_nested = res.true_sd_nested > 0.0 ? compensated_mean(dn) / res.true_sd_nested : 0.0;
    return res;
}

}  // namespace boot2lab
