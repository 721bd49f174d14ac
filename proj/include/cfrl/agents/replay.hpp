#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "cfrl/numkit/rng.hpp"
#include "cfrl/numkit/tensor.hpp"

namespace cfrl::agents {

using numkit::Rng;
using numkit::Vector;

enum class Provenance : std::uint8_t { factual = 0, counterfactual = 1 };

struct Transition {
    Vector s;
    Vector a;
    double r = 0.0;
    Vector s_next;
    bool done = false;
    Provenance provenance = Provenance::factual;

    /// Throws NumericError if any field is non-finite.
    void validate() const;

    friend bool operator==(const Transition&, const Transition&) = default;
};

/// Fixed-capacity FIFO ring of transitions with uniform with-replacement sampling.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Transition t);
    /// Uniform with replacement; throws StateError when empty.
    std::vector<Transition> sample(std::size_t batch, Rng& rng) const;

    std::size_t size() const noexcept { return items_.size(); }
    std::size_t capacity() const noexcept { return capacity_; }
    bool empty() const noexcept { return items_.empty(); }

    /// i-th oldest stored transition.
    const Transition& at(std::size_t i) const;

    /// Stored transitions with the given provenance.
    std::size_t count(Provenance p) const noexcept { return stored_[index(p)]; }
    /// Total pushes with the given provenance, including evicted ones.
    std::size_t pushed(Provenance p) const noexcept { return pushed_[index(p)]; }

private:
    static std::size_t index(Provenance p) noexcept { return static_cast<std::size_t>(p); }

    std::size_t capacity_;
    std::size_t head_ = 0;  // next slot to overwrite once full
    std::vector<Transition> items_;
    std::array<std::size_t, 2> stored_{};
    std::array<std::size_t, 2> pushed_{};
};

}  // namespace cfrl::agents
