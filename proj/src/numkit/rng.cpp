#include "cfrl/numkit/rng.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace cfrl::numkit {
namespace {

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

Rng::State seed_state(std::uint64_t seed) {
    Rng::State s;
    std::uint64_t x = seed;
    for (auto& w : s.words) w = splitmix64(x);
    return s;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

Rng::Rng(std::uint64_t seed) : state_(seed_state(seed)) {}

std::uint64_t Rng::next_u64() {
    auto& s = state_.words;
    const std::uint64_t result = rotl(s[1] * 5, 7) * 9;
    const std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    ++state_.draws;
    return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
    // u1 in (0, 1] keeps the log finite.
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t bound) {
    if (bound <= 1) return 0;
    const std::uint64_t limit = -bound % bound;  // 2^64 mod bound
    for (;;) {
        const std::uint64_t x = next_u64();
        if (x >= limit) return x % bound;
    }
}

Rng Rng::fork(std::string_view label) const {
    std::uint64_t h = fnv1a(label);
    for (auto w : state_.words) {
        h ^= w + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    std::uint64_t x = h;
    State child;
    for (auto& w : child.words) w = splitmix64(x);
    return Rng(child);
}

Rng Rng::fork(std::string_view label, std::uint64_t index) const {
    std::string full(label);
    full += '#';
    full += std::to_string(index);
    return fork(full);
}

}  // namespace cfrl::numkit
