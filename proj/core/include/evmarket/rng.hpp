// Deterministic random utilities. Every stochastic step in the pipeline draws
// from an Engine seeded through derive(), so a single root seed reproduces a
// run bit-for-bit. No global RNG state anywhere.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <type_traits>

namespace evmarket::rng {

// splitmix64 finalizer, used as the mixing step for seed derivation.
inline std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// Labeled seed derivation: derive(seed, a, b, ...) folds each label into the
// state with a splitmix round. Labels may be integers or strings.
inline std::uint64_t derive(std::uint64_t seed) { return mix(seed); }

template <typename Head, typename... Tail>
std::uint64_t derive(std::uint64_t seed, Head head, Tail... tail) {
    std::uint64_t label;
    if constexpr (std::is_convertible_v<Head, std::string_view>) {
        label = fnv1a(std::string_view(head));
    } else {
        label = static_cast<std::uint64_t>(head);
    }
    return derive(mix(seed ^ label), tail...);
}

// Thin wrapper over mt19937_64 with bit-stable draws. mt19937_64 output is
// fully specified by the standard; the helpers below avoid the
// implementation-defined std::*_distribution classes.
class Engine {
public:
    explicit Engine(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi], inclusive, via rejection sampling.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
        std::uint64_t v;
        do {
            v = gen_();
        } while (v >= limit);
        return lo + static_cast<std::int64_t>(v % range);
    }

    // Standard normal via Box-Muller; caches the second deviate.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.141592653589793238462643383279502884 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace evmarket::rng
