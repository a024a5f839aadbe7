#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace setupq {

/// Reproducible per-replication random stream.
///
/// The engine is seeded from (seed, stream index) through std::seed_seq, whose
/// mixing algorithm is fixed by the standard, and variates are produced by
/// explicit inversion so results do not depend on the library's distributions.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream)
    {
        std::seed_seq seq{
            static_cast<std::uint32_t>(seed),
            static_cast<std::uint32_t>(seed >> 32),
            static_cast<std::uint32_t>(stream),
            static_cast<std::uint32_t>(stream >> 32),
            0x5e7a9u,
        };
        engine_.seed(seq);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Exponential with the given rate; infinity for rate 0.
    double exponential(double rate)
    {
        if (rate <= 0.0)
            return std::numeric_limits<double>::infinity();
        return -std::log1p(-uniform()) / rate;
    }

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 engine_;
};

} // namespace setupq
