#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace cfrl::numkit {

/// Seedable xoshiro256** generator, seeded through splitmix64.
///
/// Every random quantity in the project flows from one of these. Child
/// streams are derived with fork(label), which reads but never advances the
/// parent, so a branch that forks can never shift the draws seen by the code
/// that owns the parent stream.
class Rng {
public:
    struct State {
        std::array<std::uint64_t, 4> words{};
        std::uint64_t draws = 0;  // number of next_u64() calls so far

        friend bool operator==(const State&, const State&) = default;
    };

    explicit Rng(std::uint64_t seed = 0);
    explicit Rng(const State& state) : state_(state) {}

    std::uint64_t next_u64();

    /// Uniform on [0, 1) with 53 bits of resolution. One draw.
    double uniform();
    /// Uniform on [lo, hi). One draw.
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Standard normal via Box-Muller; always consumes exactly two draws.
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }
    /// Uniform integer in [0, bound). Rejection sampling, variable draw count.
    std::uint64_t below(std::uint64_t bound);

    Rng fork(std::string_view label) const;
    Rng fork(std::string_view label, std::uint64_t index) const;

    const State& state() const noexcept { return state_; }
    std::uint64_t draws() const noexcept { return state_.draws; }

    friend bool operator==(const Rng&, const Rng&) = default;

private:
    State state_;
};

std::uint64_t splitmix64(std::uint64_t& x);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace cfrl::numkit
