#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>

namespace plcql {

/// Deterministic draw API on top of std::mt19937_64.
///
/// The engine itself is bit-exact across platforms; the helpers below avoid
/// std::uniform_*_distribution and std::normal_distribution, whose outputs
/// are implementation-defined. Identical seed => identical draw sequence.
class SeededRng {
  public:
    explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Unbiased integer in [0, n).
    int uniform_int(int n) {
        if (n <= 0) throw std::invalid_argument("SeededRng::uniform_int: n must be positive");
        const std::uint64_t un = static_cast<std::uint64_t>(n);
        const std::uint64_t rem = std::numeric_limits<std::uint64_t>::max() % un;
        // Reject the top partial bucket so every residue is equally likely.
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - rem;
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return static_cast<int>(x % un);
    }

    /// Standard normal via Box-Muller; consumes exactly two uniforms.
    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Exponential(1); used for Dirichlet-style simplex draws.
    double exponential() { return -std::log1p(-uniform()); }

    /// Index draw from an explicit probability vector (walks the CDF).
    int categorical(std::span<const double> probs) {
        if (probs.empty()) throw std::invalid_argument("SeededRng::categorical: empty distribution");
        const double u = uniform();
        double acc = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            acc += probs[i];
            if (u < acc) return static_cast<int>(i);
        }
        return static_cast<int>(probs.size()) - 1;
    }

    /// Independent child stream, stable for a given (seed, stream id).
    SeededRng fork(std::uint64_t stream) const { return SeededRng(mix(seed_ ^ mix(stream))); }

  private:
    // splitmix64 finalizer
    static std::uint64_t mix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

} // namespace plcql
