#include "cfrl/augment/augment.hpp"

#include "cfrl/errors.hpp"

namespace cfrl::augment {
namespace {

bool writes_at(const AugmentConfig& config, std::uint64_t step_index) {
    return (step_index + 1) % config.frequency == 0;
}

}  // namespace

std::vector<std::string> AugmentConfig::problems(std::string_view prefix) const {
    std::vector<std::string> out;
    if (frequency < 1) out.push_back(std::string(prefix) + "frequency must be >= 1");
    return out;
}

Rng counterfactual_rng(std::uint64_t seed) { return Rng(seed).fork("counterfactual"); }

Transition counterfactual_transition(envsim::Env& env, const envsim::EnvSnapshot& before,
                                     const agents::Agent& agent, const csp::CspPolicy& csp,
                                     const AugmentConfig& config, const Transition& factual, Rng& cf_rng) {
    const envsim::EnvSnapshot after = env.snapshot();

    const auto branch = env.intervene(before, csp.act(before.state.interest));
    envsim::allow_scratch_step(env);

    Transition t;
    t.s = branch.next_state;
    t.a = agents::select_action(agent, t.s, true, cf_rng);
    const auto out = env.step(t.a);
    t.r = out.reward;
    t.s_next = config.literal_paper_transition ? factual.s_next : out.next_state;
    t.done = out.done;
    t.provenance = agents::Provenance::counterfactual;

    env.restore(after);
    return t;
}

AugmentedStepRecord augmented_step(envsim::Env& env, const agents::Agent& agent, const csp::CspPolicy& csp,
                                   const AugmentConfig& config, std::uint64_t step_index, Rng& explore_rng,
                                   Rng& cf_rng) {
    AugmentedStepRecord rec;
    const envsim::EnvSnapshot before = env.snapshot();
    rec.factual = agents::factual_step(env, agent, explore_rng);
    if (config.enabled && writes_at(config, step_index)) {
        rec.counterfactual = counterfactual_transition(env, before, agent, csp, config, rec.factual, cf_rng);
    }
    return rec;
}

CounterfactualAugmenter::CounterfactualAugmenter(const csp::CspPolicy& csp, const AugmentConfig& config,
                                                 std::uint64_t seed)
    : csp_(csp), config_(config), cf_rng_(counterfactual_rng(seed)) {
    if (config.frequency < 1) throw ConfigError("augment.frequency must be >= 1");
}

std::optional<Transition> CounterfactualAugmenter::after_factual(envsim::Env& env,
                                                                 const envsim::EnvSnapshot& before,
                                                                 const agents::Agent& agent,
                                                                 const Transition& factual,
                                                                 std::uint64_t step_index) {
    if (!writes_at(config_, step_index)) return std::nullopt;
    return counterfactual_transition(env, before, agent, csp_, config_, factual, cf_rng_);
}

agents::TrainResult train_with_augmentation(agents::AgentKind kind, const envsim::EnvConfig& env_config,
                                            const agents::AgentConfig& agent_config,
                                            const AugmentConfig& config, const agents::TrainOptions& options,
                                            std::uint64_t seed, const csp::CspPolicy* csp,
                                            agents::StepObserver* observer) {
    if (!config.enabled) {
        return agents::train_agent(kind, env_config, agent_config, options, seed, nullptr, observer);
    }
    std::optional<csp::CspPolicy> loaded;
    if (csp == nullptr) {
        if (config.csp_checkpoint.empty()) throw ArtifactError("augmentation enabled but no CSP checkpoint given");
        loaded = csp::load_csp(config.csp_checkpoint);
        csp = &*loaded;
    }
    numkit::require_dim(csp->agent.state_dim, env_config.state_dim, "CSP state dimension");
    numkit::require_dim(csp->agent.action_dim, env_config.action_dim, "CSP action dimension");
    CounterfactualAugmenter hook(*csp, config, seed);
    return agents::train_agent(kind, env_config, agent_config, options, seed, &hook, observer);
}

}  // namespace cfrl::augment
