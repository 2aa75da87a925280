#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace farms {

/// Counter-based generator: every draw is a pure function of (key, counter),
/// so fills can be split across threads without changing any value.
class counter_rng {
public:
    explicit constexpr counter_rng(std::uint64_t key) : key_(mix(key ^ 0x6a09e667f3bcc909ULL)) {}

    static constexpr std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    constexpr std::uint64_t bits(std::uint64_t counter) const { return mix(key_ ^ mix(counter)); }

    /// Uniform in (0, 1).
    double uniform(std::uint64_t counter) const {
        return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller on two sub-counters.
    double normal(std::uint64_t counter) const {
        const double u1 = uniform(2 * counter);
        const double u2 = uniform(2 * counter + 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Independent child stream, e.g. one per trial.
    counter_rng derive(std::uint64_t a, std::uint64_t b = 0) const {
        return counter_rng(mix(key_ + mix(a * 0x9e3779b97f4a7c15ULL + b + 1)));
    }

    std::uint64_t key() const { return key_; }

private:
    std::uint64_t key_;
};

} // namespace farms
