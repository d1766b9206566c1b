#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

namespace sess {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace detail

/// Seedable generator: mt19937_64 engine, with uniform and normal draws
/// implemented here (not via std:: distributions) so every sequence is
/// identical for a given seed regardless of the standard library build.
///
/// Independent substreams are derived from (seed, tag) so that, e.g.,
/// redrawing the noise of a simulated dataset never perturbs its design.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Named substream of `seed`; equal (seed, tag) pairs give equal streams.
    static Rng stream(std::uint64_t seed, std::string_view tag) {
        return Rng(detail::splitmix64(seed ^ detail::fnv1a64(tag)));
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal, Box-Muller; the paired draw is cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]: keeps the log finite
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    /// Unbiased integer on [0, bound) by rejection.
    std::uint64_t below(std::uint64_t bound) {
        for (;;) {
            const std::uint64_t x = next_u64();
            const std::uint64_t r = x % bound;
            if (x - r <= ~std::uint64_t{0} - (bound - 1)) return r;
        }
    }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace sess
