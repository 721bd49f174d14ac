#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cfrl/agents/agent.hpp"
#include "cfrl/agents/training.hpp"
#include "cfrl/envsim/env.hpp"

namespace cfrl::csp {

using agents::AgentConfig;
using agents::Transition;
using numkit::MlpParams;
using numkit::Rng;
using numkit::Vector;

/// Frozen observational policy used as the causal-effect probe.
struct PretrainedPolicy {
    MlpParams actor;
    bool greedy = true;
    double explore_noise = 0.1;  // used only when !greedy

    Vector act(std::span<const double> s, Rng& rng) const;
    std::uint64_t hash() const;
};

struct CspTrainerConfig {
    std::size_t episodes = 200;
    std::size_t steps_per_episode = 50;  // capped by the env episode length
    AgentConfig agent;                   // the CSP's internal DDPG
    bool greedy_pretrained = true;
    double novelty_bonus = 0.0;          // lambda * |a_c - a_o|, off by default

    std::vector<std::string> problems(std::string_view prefix = "csp.") const;
    void validate() const;

    friend bool operator==(const CspTrainerConfig&, const CspTrainerConfig&) = default;
};

/// Counterfactual synthesis policy: a DDPG agent acting in the env action space.
struct CspPolicy {
    agents::Agent agent;
    std::uint64_t pi_o_hash = 0;

    /// Greedy counterfactual action.
    Vector act(std::span<const double> s) const { return agents::greedy_action(agent, s); }
    std::uint64_t hash() const;
};

struct PretrainResult {
    PretrainedPolicy policy;
    agents::Agent agent;  // the full DDPG agent the actor came from
    std::vector<agents::MetricsRow> metrics;
    double eval_avg_reward = 0.0;
    double eval_ctr = 0.0;
};

/// Plain DDPG on envsim for `budget` episodes; returns the frozen actor.
PretrainResult pretrain_policy(const envsim::EnvConfig& env_config, const AgentConfig& agent_config,
                               std::size_t budget, std::uint64_t seed, std::size_t eval_episodes = 10);

/// -|r_counterfactual - r_factual|
double csp_reward(double r_factual, double r_counterfactual);

struct CspStepRecord {
    Transition transition;       // CSP experience (s_t, a_c, reward, s_c)
    Vector state;                // s_t
    Vector factual_action;       // a_{o,t}
    double factual_reward = 0.0; // r_{o,t+1}
    Vector factual_next;         // s_{t+1}
    Vector csp_action;           // a_c
    Vector counterfactual_state; // s_c
    double probe_reward = 0.0;   // r_{o,c}
    double abs_dr = 0.0;
};

/// One CSP training interaction from the env's current state s_t. On return
/// the env continues the factual trajectory at s_{t+1}.
///  1. snapshot at s_t
///  2. factual: a_o = pi_o(s_t), step
///  3. counterfactual: a_c = csp(s_t) (+ noise when exploring), intervene -> s_c
///  4. probe: pi_o acts at s_c under the same exogenous noise as step 2,
///     reward r_{o,c}; the successor is discarded
///  5. restore s_{t+1}
CspStepRecord csp_training_step(envsim::Env& env, const PretrainedPolicy& pi_o, const CspPolicy& csp,
                                const CspTrainerConfig& config, bool explore, Rng& explore_rng,
                                Rng& pi_o_rng);

struct CspLogRow {
    std::size_t episode = 0;
    double mean_abs_dr = 0.0;
    double critic_loss = 0.0;
    double actor_loss = 0.0;
};

struct CspTrainResult {
    CspPolicy csp;
    std::vector<CspLogRow> log;
    std::vector<Vector> factual_states;  // s_t at every step, in order
};

/// Interleaves csp_training_step with one DDPG update per step once the CSP
/// buffer is non-empty. pi_o is never modified.
CspTrainResult train_csp(const envsim::EnvConfig& env_config, const PretrainedPolicy& pi_o,
                         const CspTrainerConfig& config, std::uint64_t seed);

/// Mean |dr| of the greedy CSP over `episodes` evaluation episodes.
double evaluate_csp(const envsim::EnvConfig& env_config, const PretrainedPolicy& pi_o, const CspPolicy& csp,
                    const CspTrainerConfig& config, std::size_t episodes, std::uint64_t seed);

/// header: episode,mean_abs_dr,csp_critic_loss,csp_actor_loss
std::string csp_log_csv(const std::vector<CspLogRow>& rows);

void save_pretrained(const PretrainResult& pretrained, const std::filesystem::path& dir,
                     const nlohmann::json& extra = nlohmann::json::object());
PretrainedPolicy load_pretrained(const std::filesystem::path& dir);

void save_csp(const CspPolicy& csp, const std::filesystem::path& dir,
              const nlohmann::json& extra = nlohmann::json::object());
CspPolicy load_csp(const std::filesystem::path& dir);

std::string hash_hex(std::uint64_t h);

}  // namespace cfrl::csp
