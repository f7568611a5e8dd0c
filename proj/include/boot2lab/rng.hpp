// rng.hpp
//
// Splittable, path-addressed random streams.
//
// A stream is named by (master_seed, stream_path).  The path is hashed with
// the SplitMix64 finalizer into a 64-bit key which seeds a xoshiro256++
// generator.  Nothing here touches global state, so the same SeedSpec gives
// the same sequence on any thread, in any order.

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <string_view>
#include <vector>

namespace boot2lab {

/// Identifier pinned into every report so outputs can be reproduced.
inline constexpr std::string_view kRngAlgorithm = "xoshiro256++/splitmix64-path-v1";

namespace detail {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace detail

struct SeedSpec {
    std::uint64_t master_seed = 0;
    std::vector<std::uint64_t> stream_path;

    SeedSpec() = default;
    explicit SeedSpec(std::uint64_t seed) : master_seed(seed) {}
    SeedSpec(std::uint64_t seed, std::initializer_list<std::uint64_t> path)
        : master_seed(seed), stream_path(path) {}
    SeedSpec(std::uint64_t seed, std::vector<std::uint64_t> path)
        : master_seed(seed), stream_path(std::move(path)) {}

    [[nodiscard]] SeedSpec child(std::uint64_t index) const {
        SeedSpec s = *this;
        s.stream_path.push_back(index);
        return s;
    }

    /// 64-bit key for this stream.  Each path element is folded in with a
    /// position-dependent tweak so [a, b] and [b, a] land on different keys.
    [[nodiscard]] std::uint64_t key() const noexcept {
        std::uint64_t h = detail::mix64(master_seed + detail::kGolden);
        std::uint64_t depth = 0;
        for (std::uint64_t p : stream_path) {
            ++depth;
            h = detail::mix64(h ^ detail::mix64(p + depth * detail::kGolden));
            h += detail::kGolden;
        }
        return h;
    }

    friend bool operator==(const SeedSpec&, const SeedSpec&) = default;
};

/// xoshiro256++ (Blackman & Vigna), satisfies UniformRandomBitGenerator.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t key) noexcept {
        std::uint64_t x = key;
        for (auto& word : s_) {
            x += detail::kGolden;
            word = detail::mix64(x);
        }
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        const std::uint64_t result = std::rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = std::rotl(s_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Unbiased integer in [0, bound), bound > 0 (Lemire's multiply-shift).
    std::uint64_t below(std::uint64_t bound) noexcept {
        unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                m = static_cast<unsigned __int128>((*this)()) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

private:
    std::array<std::uint64_t, 4> s_{};
};

/// The generator for a named stream.  Pure function of the SeedSpec.
[[nodiscard]] inline Rng derive_rng(const SeedSpec& spec) noexcept { return Rng(spec.key()); }

}  // namespace boot2lab
