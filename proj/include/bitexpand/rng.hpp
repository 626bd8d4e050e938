#pragma once

#include <array>
#include <cstdint>

namespace bitexpand {

/// xoshiro256** seeded through splitmix64. The algorithm and constants are
/// fixed so a given seed yields the same stream on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 10000);

    std::uint64_t next_u64();
    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [lo, hi] (inclusive) via modulo reduction.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    using State = std::array<std::uint64_t, 4>;
    const State& state() const { return s_; }
    void set_state(const State& s) { s_ = s; }

private:
    State s_{};
};

}  // namespace bitexpand
