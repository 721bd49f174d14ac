#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cfrl/agents/agent.hpp"
#include "cfrl/envsim/env.hpp"
#include "cfrl/kernels/parallel.hpp"

namespace cfrl::agents {

struct TrainOptions {
    std::size_t episodes = 0;
    std::size_t eval_every = 50;     // evaluate after every N episodes and after the last
    std::size_t eval_episodes = 10;
    /// Stop after the first evaluation whose average reward reaches this.
    std::optional<double> stop_at_reward;
};

/// One evaluation row of the metrics log.
struct MetricsRow {
    std::size_t episode = 0;     // episodes completed
    std::uint64_t env_steps = 0; // factual env steps so far
    double eval_avg_reward = 0.0;
    double eval_ctr = 0.0;
    std::size_t buffer_size = 0;
    double buffer_cf_fraction = 0.0;
    double wall_ms = 0.0;
};

/// Extra per-step work layered over the factual step, e.g. counterfactual
/// augmentation. `before` is the env snapshot taken at s_t; the env is at
/// s_{t+1} on entry and must be left there on exit.
class StepHook {
public:
    virtual ~StepHook() = default;
    virtual std::optional<Transition> after_factual(envsim::Env& env, const envsim::EnvSnapshot& before,
                                                    const Agent& agent, const Transition& factual,
                                                    std::uint64_t step_index) = 0;
};

/// Per-step observer (factual states visited, for isolation tests).
class StepObserver {
public:
    virtual ~StepObserver() = default;
    virtual void on_step(const Transition& factual, const Agent& agent) = 0;
};

struct TrainResult {
    Agent agent;
    std::vector<MetricsRow> metrics;
    std::uint64_t env_steps = 0;
    std::size_t buffer_size = 0;
    std::size_t buffer_factual = 0;
    std::size_t buffer_counterfactual = 0;
    std::size_t episodes_run = 0;
};

/// Exploring factual step: act on s_t, step the env, return the transition.
Transition factual_step(envsim::Env& env, const Agent& agent, Rng& explore_rng);

/// Off-policy training loop on envsim. One agent update per factual env step
/// once the buffer holds `learning_starts` items. Random streams are forked
/// from `seed` under fixed labels: "init", "explore", "update", "env", "eval".
TrainResult train_agent(AgentKind kind, const envsim::EnvConfig& env_config,
                        const AgentConfig& agent_config, const TrainOptions& options,
                        std::uint64_t seed, StepHook* hook = nullptr,
                        StepObserver* observer = nullptr);

/// Seed used for evaluation episodes of a training run.
std::uint64_t eval_seed_for(std::uint64_t seed);

kernels::EvalResult evaluate_agent(const Agent& agent, const envsim::EnvConfig& env_config,
                                   std::size_t episodes, std::uint64_t seed);

/// Uniform-random policy baseline on the same evaluation episodes.
kernels::EvalResult evaluate_random(const envsim::EnvConfig& env_config, std::size_t episodes,
                                    std::uint64_t seed);

/// CSV with header run_id,episode,env_steps,eval_avg_reward,eval_ctr,buffer_size,buffer_cf_fraction,wall_ms
std::string metrics_csv(const std::string& run_id, const std::vector<MetricsRow>& rows);

}  // namespace cfrl::agents
