#ifndef ANL_RNG_HPP
#define ANL_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace anl {

// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Counter-based key: a distinct stream for every (seed, stream, counter).
constexpr std::uint64_t keyed(std::uint64_t seed, std::uint64_t stream,
                              std::uint64_t counter = 0) noexcept {
    return mix64(mix64(mix64(seed) ^ stream) ^ counter);
}

// Uniform in [0, 1) from the top 53 bits of a word.
constexpr double to_unit(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

inline double keyed_uniform(std::uint64_t seed, std::uint64_t stream,
                            std::uint64_t counter) noexcept {
    return to_unit(keyed(seed, stream, counter));
}

// Stream identifiers used to derive independent sub-seeds.
namespace stream {
inline constexpr std::uint64_t data = 0x01;
inline constexpr std::uint64_t noise = 0x02;
inline constexpr std::uint64_t init = 0x03;
inline constexpr std::uint64_t shuffle = 0x04;
inline constexpr std::uint64_t probe = 0x05;
inline constexpr std::uint64_t check = 0x06;
} // namespace stream

// Sequential generator whose output is fully specified by the standard
// (mt19937_64 bits only; no implementation-defined distributions), so
// uniform() and normal() reproduce across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t bits() { return engine_(); }

    double uniform() { return to_unit(engine_()); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n) by rejection.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    // Box-Muller, one value per call.
    double normal() {
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::mt19937_64 engine_;
};

} // namespace anl

#endif // ANL_RNG_HPP
