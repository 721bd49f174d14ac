#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cfrl/agents/training.hpp"
#include "cfrl/csp/csp.hpp"

namespace cfrl::augment {

using agents::Transition;
using numkit::Rng;

struct AugmentConfig {
    bool enabled = false;
    std::string csp_checkpoint;
    std::size_t frequency = 1;  // one counterfactual write every `frequency` factual steps
    /// Store the factual s_{t+1} as the counterfactual transition's next state
    /// instead of the counterfactual branch's own successor.
    bool literal_paper_transition = false;

    std::vector<std::string> problems(std::string_view prefix = "augment.") const;

    friend bool operator==(const AugmentConfig&, const AugmentConfig&) = default;
};

struct AugmentedStepRecord {
    Transition factual;
    std::optional<Transition> counterfactual;
};

/// Counterfactual branch for the factual step just taken from `before` (s_t).
/// Intervenes with the greedy CSP action to reach s_{c,t+1}, lets the agent act
/// there (exploring, on `cf_rng`), and steps that branch once. The env is
/// restored to s_{t+1} before returning.
Transition counterfactual_transition(envsim::Env& env, const envsim::EnvSnapshot& before,
                                     const agents::Agent& agent, const csp::CspPolicy& csp,
                                     const AugmentConfig& config, const Transition& factual, Rng& cf_rng);

/// Factual step plus, on every `frequency`-th step, one counterfactual transition.
AugmentedStepRecord augmented_step(envsim::Env& env, const agents::Agent& agent, const csp::CspPolicy& csp,
                                   const AugmentConfig& config, std::uint64_t step_index, Rng& explore_rng,
                                   Rng& cf_rng);

/// StepHook that writes counterfactual transitions during training.
class CounterfactualAugmenter : public agents::StepHook {
public:
    CounterfactualAugmenter(const csp::CspPolicy& csp, const AugmentConfig& config, std::uint64_t seed);

    std::optional<Transition> after_factual(envsim::Env& env, const envsim::EnvSnapshot& before,
                                            const agents::Agent& agent, const Transition& factual,
                                            std::uint64_t step_index) override;

private:
    const csp::CspPolicy& csp_;
    AugmentConfig config_;
    Rng cf_rng_;
};

/// Random stream used for the agent's actions on counterfactual branches.
Rng counterfactual_rng(std::uint64_t seed);

/// train_agent with counterfactual augmentation when config.enabled. `csp` may
/// be null, in which case it is loaded from config.csp_checkpoint.
agents::TrainResult train_with_augmentation(agents::AgentKind kind, const envsim::EnvConfig& env_config,
                                            const agents::AgentConfig& agent_config,
                                            const AugmentConfig& config, const agents::TrainOptions& options,
                                            std::uint64_t seed, const csp::CspPolicy* csp = nullptr,
                                            agents::StepObserver* observer = nullptr);

}  // namespace cfrl::augment
