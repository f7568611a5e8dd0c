// test_sampling.cpp
//
// Unit tests for the random streams, Gaussian draws, bootstrap resample
// counts and compensated weighted means.

#include "catch_amalgamated.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "boot2lab/rng.hpp"
#include "boot2lab/sampling.hpp"
#include "boot2lab/summation.hpp"

using namespace boot2lab;

namespace {

std::vector<std::uint64_t> draw(Rng rng, std::size_t n) {
    std::vector<std::uint64_t> out(n);
    for (auto& v : out) v = rng();
    return out;
}

// Plain long-double moments, independent of the compensated helpers.
struct Moments {
    long double mean, sd;
};

Moments moments_of(const std::vector<double>& xs) {
    long double s = 0;
    for (double x : xs) s += x;
    const long double mean = s / xs.size();
    long double ss = 0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / (xs.size() - 1))};
}

}  // namespace

TEST_CASE("derive_rng is a pure function of seed and path", "[sampling][rng]") {
    CHECK(draw(derive_rng(SeedSpec(42, {0})), 1000) == draw(derive_rng(SeedSpec(42, {0})), 1000));
    CHECK(draw(derive_rng(SeedSpec(42, {0})), 16) != draw(derive_rng(SeedSpec(42, {1})), 16));
    CHECK(draw(derive_rng(SeedSpec(42, {0})), 16) != draw(derive_rng(SeedSpec(43, {0})), 16));
    CHECK(draw(derive_rng(SeedSpec(42, {1, 2})), 16) != draw(derive_rng(SeedSpec(42, {2, 1})), 16));
    CHECK(draw(derive_rng(SeedSpec(42)), 16) != draw(derive_rng(SeedSpec(42, {0})), 16));
    CHECK(SeedSpec(9).child(4).child(2) == SeedSpec(9, {4, 2}));
}

TEST_CASE("stream seed 7 path [3] has negligible serial correlation", "[sampling][rng]") {
    Rng rng = derive_rng(SeedSpec(7, {3}));
    const std::size_t n = 1'000'000;
    std::vector<double> x(n);
    for (auto& v : x) v = rng.uniform();
    long double mean = 0;
    for (double v : x) mean += v;
    mean /= n;
    long double num = 0, den = 0;
    for (std::size_t i = 0; i < n; ++i) {
        den += (x[i] - mean) * (x[i] - mean);
        if (i + 1 < n) num += (x[i] - mean) * (x[i + 1] - mean);
    }
    const double lag1 = static_cast<double>(num / den);
    CHECK(std::abs(lag1) < 0.01);
    // Regression value for xoshiro256++/splitmix64-path-v1.
    CHECK(lag1 == Catch::Approx(-0.0001660539).margin(1e-9));
    CHECK(x[0] == 0.18363572643923276);
}

TEST_CASE("Rng::below stays in range and hits every value", "[sampling][rng]") {
    Rng rng = derive_rng(SeedSpec(1, {5}));
    std::vector<int> seen(7, 0);
    for (int i = 0; i < 7000; ++i) {
        const auto v = rng.below(7);
        REQUIRE(v < 7);
        ++seen[v];
    }
    for (int s : seen) CHECK(s > 800);
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
}

TEST_CASE("sample_gaussian degenerate and invalid parameters", "[sampling][gaussian]") {
    Rng rng = derive_rng(SeedSpec(1));
    CHECK(sample_gaussian(rng, 5.0, 0.0, 3) == std::vector<double>{5.0, 5.0, 5.0});
    CHECK(sample_gaussian(rng, 1.0, 2.0, 0).empty());
    CHECK_THROWS_AS(sample_gaussian(rng, 0.0, -1.0, 3), InvalidParameter);
    CHECK_THROWS_AS(sample_gaussian(rng, 0.0, std::nan(""), 3), InvalidParameter);
    CHECK(sample_gaussian(rng, 0.0, 1.0, 7).size() == 7);
}

TEST_CASE("sample_gaussian moments match the CLT bands", "[sampling][gaussian]") {
    Rng rng = derive_rng(SeedSpec(2024, {1}));
    const auto std_normal = moments_of(sample_gaussian(rng, 0.0, 1.0, 1'000'000));
    CHECK(std::abs(static_cast<double>(std_normal.mean)) < 4.0 / 1000.0);
    CHECK(std::abs(static_cast<double>(std_normal.sd) - 1.0) < 0.01);

    const auto wide = moments_of(sample_gaussian(rng, 5.0, 100.0, 1'000'000));
    CHECK(std::abs(static_cast<double>(wide.mean) - 5.0) < 0.4);
}

TEST_CASE("bootstrap_counts basic outcomes", "[sampling][counts]") {
    Rng rng = derive_rng(SeedSpec(3));
    const auto one = bootstrap_counts(rng, 1, ResampleMode::multinomial);
    CHECK(one.counts == std::vector<std::uint32_t>{1});
    CHECK(one.total == 1);
    CHECK_THROWS_AS(bootstrap_counts(rng, 0, ResampleMode::multinomial), InvalidParameter);
    CHECK_THROWS_AS(bootstrap_counts(rng, 0, ResampleMode::poisson), InvalidParameter);
    const auto none = bootstrap_counts(rng, 4, ResampleMode::none);
    CHECK(none.counts == std::vector<std::uint32_t>{1, 1, 1, 1});
}

TEST_CASE("multinomial counts for n=2 match exhaustive enumeration", "[sampling][counts]") {
    // Oracle: all 2^2 index tuples, each with probability 1/4.
    std::map<std::vector<std::uint32_t>, double> exact;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            std::vector<std::uint32_t> c(2, 0);
            ++c[a];
            ++c[b];
            exact[c] += 0.25;
        }
    REQUIRE(exact.size() == 3);

    Rng rng = derive_rng(SeedSpec(11, {2}));
    const int draws = 100'000;
    std::map<std::vector<std::uint32_t>, int> seen;
    for (int i = 0; i < draws; ++i) {
        auto c = bootstrap_counts(rng, 2, ResampleMode::multinomial);
        REQUIRE(c.total == 2);
        ++seen[c.counts];
    }
    REQUIRE(seen.size() == 3);
    for (const auto& [counts, p] : exact) {
        const double sigma = std::sqrt(draws * p * (1 - p));
        CHECK(std::abs(seen[counts] - draws * p) < 3 * sigma);
    }
}

TEST_CASE("multinomial counts always sum to n", "[sampling][counts][property]") {
    Rng gen = derive_rng(SeedSpec(99));
    ResampleCounts c;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + gen.below(500);
        bootstrap_counts_into(gen, n, ResampleMode::multinomial, c);
        std::uint64_t sum = 0;
        for (auto v : c.counts) sum += v;
        REQUIRE(c.counts.size() == n);
        REQUIRE(sum == n);
        REQUIRE(c.total == n);
    }
}

TEST_CASE("poisson counts have unit mean and variance", "[sampling][counts]") {
    Rng rng = derive_rng(SeedSpec(5, {8}));
    const std::size_t n = 1'000'000;
    const auto c = bootstrap_counts(rng, n, ResampleMode::poisson);
    CHECK(std::abs(static_cast<double>(c.total) - 1e6) < 4000.0);
    std::uint64_t sum = 0;
    long double ss = 0;
    for (auto v : c.counts) {
        sum += v;
        ss += (v - 1.0L) * (v - 1.0L);
    }
    CHECK(sum == c.total);
    CHECK(std::abs(static_cast<double>(ss / n) - 1.0) < 0.01);
}

TEST_CASE("weighted_mean small cases and errors", "[sampling][weighted_mean]") {
    const std::vector<double> v{4.0, 6.0};
    CHECK(weighted_mean(v, {{1, 1}, 2}) == 5.0);
    CHECK(weighted_mean(v, {{2, 0}, 2}) == 4.0);
    CHECK(weighted_mean(v, {{0, 3}, 3}) == 6.0);
    CHECK_THROWS_AS(weighted_mean(v, {{1}, 1}), InvalidInput);
    CHECK_THROWS_AS(weighted_mean(v, {{0, 0}, 0}), DegenerateResample);
}

TEST_CASE("weighted_mean is correctly rounded on catastrophic sums", "[sampling][weighted_mean]") {
    // Oracle: exact integer arithmetic, then round-half-even to a double.
    // Every quotient below lies in [2^52, 2^53) where the double spacing is 1.
    auto exact_mean = [](const std::vector<double>& xs) {
        __int128 sum = 0;
        for (double x : xs) sum += static_cast<__int128>(x);
        const __int128 q = static_cast<__int128>(xs.size());
        __int128 whole = sum / q;
        const __int128 twice_rem = 2 * (sum % q);
        if (twice_rem > q || (twice_rem == q && (whole % 2) != 0)) ++whole;
        return static_cast<double>(whole);
    };

    const std::size_t half = 1'000'000;
    for (double small : {1.0, 2.0, 3.0}) {
        std::vector<double> xs(half, 1e16);
        xs.insert(xs.end(), half, small);
        ResampleCounts ones{std::vector<std::uint32_t>(xs.size(), 1), xs.size()};
        const double expected = exact_mean(xs);
        INFO("small = " << small);
        CHECK(weighted_mean(xs, ones) == expected);

        // Interleaved order must not matter either.
        std::vector<double> mixed;
        for (std::size_t i = 0; i < half; ++i) {
            mixed.push_back(small);
            mixed.push_back(1e16);
        }
        CHECK(weighted_mean(mixed, ones) == expected);
    }

    // A naive running sum drops every small addend here.
    std::vector<double> xs(half, 1e16);
    xs.insert(xs.end(), half, 2.0);
    double naive = 0;
    for (double x : xs) naive += x;
    CHECK(naive / static_cast<double>(xs.size()) != exact_mean(xs));
}

TEST_CASE("weighted_mean with unit counts equals the ordinary mean", "[sampling][weighted_mean][property]") {
    Rng gen = derive_rng(SeedSpec(17));
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + gen.below(2000);
        const double scale = std::pow(10.0, static_cast<double>(gen.below(12)) - 3.0);
        auto xs = sample_gaussian(gen, scale, scale, n);
        long double s = 0;
        for (double x : xs) s += x;
        const double plain = static_cast<double>(s / n);
        ResampleCounts ones{std::vector<std::uint32_t>(n, 1), n};
        const double wm = weighted_mean(xs, ones);
        REQUIRE(std::abs(wm - plain) <= 4 * std::numeric_limits<double>::epsilon() * std::abs(plain) +
                                             std::numeric_limits<double>::min());
        REQUIRE(wm == compensated_mean(xs));
    }
}

TEST_CASE("weighted_mean matches materialised resampling", "[sampling][weighted_mean]") {
    Rng rng = derive_rng(SeedSpec(23));
    const auto xs = sample_gaussian(rng, 3.0, 2.0, 1000);
    for (auto mode : {ResampleMode::multinomial, ResampleMode::poisson}) {
        const auto c = bootstrap_counts(rng, xs.size(), mode);
        long double s = 0;
        std::uint64_t total = 0;
        for (std::size_t i = 0; i < xs.size(); ++i)
            for (std::uint32_t j = 0; j < c.counts[i]; ++j) {
                s += xs[i];
                ++total;
            }
        CHECK(total == c.total);
        CHECK(weighted_mean(xs, c) == Catch::Approx(static_cast<double>(s / total)).epsilon(1e-14));
    }
}

TEST_CASE("compensated helpers", "[sampling][summation]") {
    const std::vector<double> two{0.0, 2.0};
    CHECK(sample_variance(two) == 2.0);
    CHECK(sample_variance(std::vector<double>{3.0, 3.0, 3.0}) == 0.0);
    CHECK_THROWS_AS(sample_variance(std::vector<double>{1.0}), InvalidInput);
    CHECK_THROWS_AS(compensated_mean(std::vector<double>{}), InvalidInput);
    CHECK(sample_covariance(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 6}) == 2.0);
    const auto [p, e] = two_prod(0.1, 0.1);
    CHECK(static_cast<long double>(p) + e == static_cast<long double>(0.1) * 0.1);
}
