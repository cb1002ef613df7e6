#pragma once

// Self-contained deterministic PRNG so every artifact (datasets, weights,
// shuffles) is reproducible byte-for-byte across platforms and standard
// library versions. std::mt19937 + std::*_distribution would tie outputs to
// a particular libstdc++; these algorithms are pinned here instead.
//
//   seeding      splitmix64 over the user seed fills the xoshiro state
//   generator    xoshiro256++ (Blackman & Vigna)
//   uniform01    53-bit mantissa draw, value in [0, 1)
//   normal       Box-Muller, consumes exactly two draws per call
//   next_below   multiply-high rejection-free bounded integer
//
// Each call order is part of the file-format contract: changing it changes
// generated datasets.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>
#include <vector>

namespace pumpmon {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

class Prng {
public:
    explicit Prng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : s_) word = splitmix64(sm);
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // [0, 1), 53 significant bits
    double uniform01() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    // [lo, hi)
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    // Standard normal via Box-Muller. Consumes exactly two draws; u1 is
    // shifted into (0, 1] so the log never sees zero.
    double normal() {
        const double u1 = (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

    // Uniform integer in [0, bound). Multiply-high mapping: one draw, no
    // rejection loop, bias below 2^-64 * bound.
    std::uint64_t next_below(std::uint64_t bound) {
        const auto x = static_cast<unsigned __int128>(next());
        return static_cast<std::uint64_t>((x * bound) >> 64);
    }

    // Fisher-Yates, back to front.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t s_[4];
};

// Independent child stream: hash the pair (seed, stream) through splitmix64
// twice so sibling streams never overlap in practice.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t sm = seed;
    const std::uint64_t a = splitmix64(sm);
    sm = a ^ (stream * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull);
    const std::uint64_t b = splitmix64(sm);
    sm = b + stream;
    return splitmix64(sm);
}

} // namespace pumpmon
