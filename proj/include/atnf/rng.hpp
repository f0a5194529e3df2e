#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace atnf {

/// Deterministic, platform-independent pseudo-random generator.
///
/// std::mt19937 is portable but the standard distributions are not; every
/// stream the project relies on for reproducibility (init, shuffling,
/// synthetic data) goes through this generator instead.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(splitmix64(seed + 0x9E3779B97F4A7C15ull)) {}

    /// Derives an independent stream, e.g. Rng::derive(seed, epoch).
    static Rng derive(uint64_t seed, uint64_t stream) {
        Rng r(seed);
        r.state_ ^= splitmix64(stream + 0xD1B54A32D192ED03ull);
        r.next_u64();
        return r;
    }

    uint64_t next_u64() {
        // xorshift64* on a splitmix-initialized state
        uint64_t x = state_;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        state_ = x;
        return x * 0x2545F4914F6CDD1Dull;
    }

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    uint64_t uniform_int(uint64_t n) { return next_u64() % n; }

    /// Standard normal via Box-Muller (no cached second value, keeps the
    /// stream position independent of call parity).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Fisher-Yates permutation of 0..n-1.
    std::vector<size_t> permutation(size_t n) {
        std::vector<size_t> p(n);
        std::iota(p.begin(), p.end(), size_t{0});
        for (size_t i = n; i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(i));
            std::swap(p[i - 1], p[j]);
        }
        return p;
    }

private:
    static uint64_t splitmix64(uint64_t x) {
        x += 0x9E3779B97F4A7C15ull;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
        return x ^ (x >> 31);
    }

    uint64_t state_;
};

}  // namespace atnf
