#pragma once

#include <cstdint>
#include <string_view>

namespace wncs {

/// splitmix64 generator. The 64-bit state is the whole generator, so copying an
/// Rng forks an identical stream.
class Rng {
public:
    explicit constexpr Rng(std::uint64_t seed = 0) noexcept : state_(seed) {}

    constexpr std::uint64_t next_u64() noexcept {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept;

    /// Standard normal via Box-Muller on two consecutive 53-bit uniforms
    /// (cosine branch only; each call consumes exactly two draws).
    double gaussian() noexcept;

    /// True with probability p (one uniform draw, even for p in {0, 1}).
    bool bernoulli(double p) noexcept { return uniform() < p; }

    constexpr std::uint64_t state() const noexcept { return state_; }

    friend constexpr bool operator==(const Rng&, const Rng&) = default;

private:
    std::uint64_t state_;
};

/// Independent stream for a named purpose. Streams with different names share
/// no draws, so e.g. changing how often the network draws does not perturb the
/// plant noise of a matched-seed run.
Rng derive_stream(std::uint64_t seed, std::string_view purpose, std::uint64_t index = 0) noexcept;

} // namespace wncs
