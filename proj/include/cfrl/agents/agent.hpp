#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfrl/agents/replay.hpp"
#include "cfrl/numkit/adam.hpp"
#include "cfrl/numkit/mlp.hpp"

namespace cfrl::agents {

using numkit::AdamState;
using numkit::MlpGrads;
using numkit::MlpParams;

enum class AgentKind : std::uint8_t { ddpg, td3, sac };

std::string_view kind_name(AgentKind kind);
AgentKind kind_from_name(std::string_view name);

struct AgentConfig {
    double gamma = 0.95;
    double tau = 0.001;
    double actor_lr = 0.003;
    double critic_lr = 0.003;
    std::vector<std::size_t> hidden{128, 128};
    std::size_t batch_size = 5;
    std::size_t buffer_capacity = 100000;
    std::size_t learning_starts = 1;  // updates begin once the buffer holds this many
    double explore_noise = 0.1;
    // TD3
    std::size_t policy_delay = 2;
    double target_noise = 0.2;
    double noise_clip = 0.5;
    // SAC
    double entropy_alpha = 0.2;

    /// One message per violated bound; empty when valid.
    std::vector<std::string> problems(std::string_view prefix = "agent.") const;
    void validate() const;

    friend bool operator==(const AgentConfig&, const AgentConfig&) = default;
};

nlohmann::json to_json(const AgentConfig& config);
AgentConfig agent_config_from_json(const nlohmann::json& j);

struct Critic {
    MlpParams net;     // Q(s, a): input is [s, a]
    MlpParams target;
    AdamState opt;
};

/// Actor-critic learner. DDPG has one critic, TD3 and SAC have twins.
/// SAC's actor emits [mean, log_std] and has no target copy.
struct Agent {
    AgentKind kind = AgentKind::ddpg;
    AgentConfig config;
    std::size_t state_dim = 0;
    std::size_t action_dim = 0;
    MlpParams actor;
    MlpParams actor_target;
    AdamState actor_opt;
    std::vector<Critic> critics;
    std::uint64_t updates = 0;
};

Agent make_agent(AgentKind kind, const AgentConfig& config, std::size_t state_dim,
                 std::size_t action_dim, Rng& init_rng);

/// Deterministic action in [-1, 1]^m (tanh(mean) for SAC).
Vector greedy_action(const Agent& agent, std::span<const double> s);

/// Greedy action when !explore. Otherwise DDPG/TD3 add Normal(0, explore_noise)
/// and clip; SAC samples its squashed Gaussian.
Vector select_action(const Agent& agent, std::span<const double> s, bool explore, Rng& rng);

struct UpdateLosses {
    double critic_loss = 0.0;  // mean over critics for twin-critic agents
    double actor_loss = 0.0;
    bool actor_updated = false;
};

/// y = r + gamma * Q_targ(s', actor_targ(s')), or r when done.
double ddpg_critic_target(const Agent& agent, const Transition& t);
UpdateLosses ddpg_update(Agent& agent, std::span<const Transition> batch);

/// clip(actor_targ(s') + clip(N(0, target_noise), +-noise_clip), +-1)
Vector td3_target_action(const Agent& agent, std::span<const double> s_next, Rng& rng);
double td3_critic_target(const Agent& agent, const Transition& t, Rng& rng);
UpdateLosses td3_update(Agent& agent, std::span<const Transition> batch,
                        std::uint64_t update_index, Rng& rng);

/// Reparameterised squashed-Gaussian sample.
struct SacSample {
    Vector action;   // tanh(u)
    Vector pre_tanh; // u = mean + exp(log_std) * noise
    Vector mean;
    Vector log_std;  // clamped
    Vector noise;
    double log_prob = 0.0;
};

inline constexpr double kSacLogStdMin = -5.0;
inline constexpr double kSacLogStdMax = 2.0;

SacSample sac_sample(const MlpParams& actor, std::span<const double> s, Rng& rng);
SacSample sac_sample_with_noise(const MlpParams& actor, std::span<const double> s,
                                std::span<const double> noise);
/// log N(u; mean, std) summed, minus sum log(1 - tanh(u)^2) in a stable form.
double squashed_gaussian_log_prob(std::span<const double> pre_tanh, std::span<const double> mean,
                                  std::span<const double> log_std);

double sac_critic_target(const Agent& agent, const Transition& t, Rng& rng);

struct SacActorObjective {
    double loss = 0.0;  // mean(alpha * log_pi - min_i Q_i)
    MlpGrads grads;
};

/// Actor objective and its gradient with the reparameterisation noise held fixed.
SacActorObjective sac_actor_objective(const Agent& agent, std::span<const Transition> batch,
                                      std::span<const Vector> noise);
UpdateLosses sac_update(Agent& agent, std::span<const Transition> batch, Rng& rng);

/// Dispatches on kind and advances agent.updates.
UpdateLosses agent_update(Agent& agent, std::span<const Transition> batch, Rng& rng);

/// Directory of serialized networks + manifest.json. `extra` fields are merged
/// into the manifest.
void save_agent(const Agent& agent, const std::filesystem::path& dir,
                const nlohmann::json& extra = nlohmann::json::object());

struct LoadedAgent {
    Agent agent;
    nlohmann::json manifest;
};

/// Throws ArtifactError when the directory, manifest or any network is missing or corrupt.
LoadedAgent load_agent(const std::filesystem::path& dir);

}  // namespace cfrl::agents
