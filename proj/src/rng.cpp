#include "wncs/rng.hpp"

#include <cmath>
#include <numbers>

namespace wncs {

double Rng::uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() noexcept {
    // u1 in (0, 1] keeps the logarithm finite
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Rng derive_stream(std::uint64_t seed, std::string_view purpose, std::uint64_t index) noexcept {
    // FNV-1a over the purpose tag, then mixed through splitmix64 with the seed
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (const char c : purpose) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    Rng mix(seed ^ h);
    const std::uint64_t a = mix.next_u64();
    Rng mix2(a + index * 0xD1B54A32D192ED03ULL);
    return Rng(mix2.next_u64());
}

} // namespace wncs
