#pragma once

#include <cstdint>
#include <random>

namespace rsmud {

/// Seed mixer used to split one experiment seed into independent streams.
[[nodiscard]] std::uint64_t splitmix64(std::uint64_t x);

/// Pseudorandom source owned by exactly one trial or thread.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    /// Independent stream addressed by (seed, a, b), e.g. (seed, point, trial).
    [[nodiscard]] static Rng stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    bool bernoulli(double p) { return uniform() < p; }
    /// Fair bit: 0 or 1.
    std::uint32_t bit() { return static_cast<std::uint32_t>(engine_() >> 63); }
    std::uint64_t next() { return engine_(); }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace rsmud
