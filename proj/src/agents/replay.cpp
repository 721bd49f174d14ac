#include "cfrl/agents/replay.hpp"

#include <string>

#include "cfrl/errors.hpp"

namespace cfrl::agents {

void Transition::validate() const {
    numkit::require_finite(s, "transition state");
    numkit::require_finite(a, "transition action");
    numkit::require_finite(s_next, "transition next state");
    numkit::require_finite(std::span<const double>(&r, 1), "transition reward");
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay buffer capacity must be >= 1");
    items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
    t.validate();
    ++pushed_[index(t.provenance)];
    ++stored_[index(t.provenance)];
    if (items_.size() < capacity_) {
        items_.push_back(std::move(t));
        return;
    }
    --stored_[index(items_[head_].provenance)];
    items_[head_] = std::move(t);
    head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
    if (i >= items_.size()) throw StateError("replay index out of range");
    return items_[(head_ + i) % items_.size()];
}

std::vector<Transition> ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
    if (items_.empty()) throw StateError("cannot sample from an empty replay buffer");
    std::vector<Transition> out;
    out.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) out.push_back(items_[rng.below(items_.size())]);
    return out;
}

}  // namespace cfrl::agents
