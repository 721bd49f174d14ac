#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cfrl/numkit/rng.hpp"
#include "cfrl/numkit/tensor.hpp"

namespace cfrl::envsim {

using numkit::Matrix;
using numkit::Rng;
using numkit::Vector;

/// Synthetic interactive-recommendation environment parameters.
struct EnvConfig {
    std::size_t state_dim = 16;   // n: user-interest dimension
    std::size_t action_dim = 8;   // m: recommendation embedding dimension
    std::size_t slots = 10;       // K: items shown per recommendation
    double drift = 0.3;           // interest drift rate, in [0, 1]
    double noise = 0.05;          // drift noise scale sigma
    double click_gain = 4.0;
    double click_bias = -1.0;
    std::size_t episode_len = 50;  // T
    std::uint64_t projection_seed = 7;  // seeds the fixed action->interest projection

    /// One message per violated bound; empty when valid.
    std::vector<std::string> problems(std::string_view prefix = "env.") const;
    /// Throws ConfigError listing every violated bound.
    void validate() const;
    /// Stable hash of every field; snapshots carry it to reject cross-config restores.
    std::uint64_t fingerprint() const;

    friend bool operator==(const EnvConfig&, const EnvConfig&) = default;
};

/// Fixed projection W (state_dim x action_dim) with unit-norm columns.
Matrix make_projection(const EnvConfig& config);

/// S_t: the endogenous state.
struct EnvState {
    Vector interest;  // unit norm
    std::size_t step = 0;

    friend bool operator==(const EnvState&, const EnvState&) = default;
};

/// U_{t+1}: exogenous noise consumed by one transition.
struct ExogenousNoise {
    std::vector<double> click_uniforms;  // one per slot; slot k clicks iff u_k < p_click
    Vector drift_normals;                // one per state dimension
};

struct StepOutcome {
    Vector next_state;
    double reward = 0.0;  // integer click count in [0, K]
    double ctr = 0.0;     // reward / K
    bool done = false;

    friend bool operator==(const StepOutcome&, const StepOutcome&) = default;
};

/// Pure structural equation S_{t+1} = f(S_t, A_t, U_{t+1}).
StepOutcome transition(const EnvConfig& config, const Matrix& projection, const EnvState& state,
                       std::span<const double> action, const ExogenousNoise& noise);

/// Click probability for an action at an interest vector.
double click_probability(const EnvConfig& config, const Matrix& projection,
                         std::span<const double> interest, std::span<const double> action);

struct EnvSnapshot {
    EnvState state;
    Rng::State click_rng;
    Rng::State drift_rng;
    std::uint64_t config_fingerprint = 0;

    friend bool operator==(const EnvSnapshot&, const EnvSnapshot&) = default;
};

std::vector<std::uint8_t> serialize_snapshot(const EnvSnapshot& snap);
EnvSnapshot deserialize_snapshot(std::span<const std::uint8_t> bytes);

/// One user trajectory. Click coins and drift noise come from separate
/// labelled sub-streams of the reset seed.
class Env {
public:
    /// Throws ConfigError on an invalid config.
    Env(const EnvConfig& config, std::uint64_t seed);

    const EnvConfig& config() const noexcept { return config_; }
    const Matrix& projection() const noexcept { return projection_; }
    const EnvState& state() const noexcept { return state_; }
    Vector observe() const { return state_.interest; }
    bool done() const noexcept { return state_.step >= config_.episode_len; }

    /// Draws U_{t+1} from the env streams and applies the transition.
    /// Throws StateError past the episode end, NumericError/DimensionError on a bad action.
    StepOutcome step(std::span<const double> action);

    EnvSnapshot snapshot() const;
    /// Throws ConfigError if the snapshot was taken under a different config.
    void restore(const EnvSnapshot& snap);

    /// Restore `snap`, then step with `action`: do(A := action) under the
    /// snapshot's pending noise.
    StepOutcome intervene(const EnvSnapshot& snap, std::span<const double> action);

    std::uint64_t click_draws() const noexcept { return click_rng_.draws(); }
    std::uint64_t drift_draws() const noexcept { return drift_rng_.draws(); }

private:
    EnvConfig config_;
    Matrix projection_;
    std::uint64_t fingerprint_;
    EnvState state_;
    Rng click_rng_;
    Rng drift_rng_;
};

/// If the env sits on the terminal step, rewind its step counter by one so a
/// scratch branch can take one more transition. State and noise are untouched.
void allow_scratch_step(Env& env);

/// Action uniform on [-1, 1]^m.
Vector random_action(std::size_t action_dim, Rng& rng);

}  // namespace cfrl::envsim
