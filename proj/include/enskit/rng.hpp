#pragma once

#include <cstdint>
#include <vector>

namespace enskit {

/// Deterministic xoshiro256++ generator seeded through splitmix64.
///
/// All stochastic behavior in the library (weight init, minibatch order,
/// data synthesis, augmentation) flows through this class so that a fixed
/// seed reproduces a run bit-for-bit, independent of the standard library's
/// distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform();

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi);

    /// Standard normal via Box-Muller (two uniforms per call).
    double normal();
    double normal(double mean, double stddev);

    /// Uniform integer in [0, bound), unbiased (rejection sampling). bound > 0.
    std::uint64_t uniform_int(std::uint64_t bound);

    /// +1.0 or -1.0 with equal probability.
    double sign();

    /// True with probability p.
    bool bernoulli(double p);

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(values[i - 1], values[j]);
        }
    }

private:
    std::uint64_t state_[4];
};

/// Seed for member `index` of an ensemble built on `base_seed`.
/// Distinct, reproducible per-member streams.
std::uint64_t member_seed(std::uint64_t base_seed, int index);

} // namespace enskit
