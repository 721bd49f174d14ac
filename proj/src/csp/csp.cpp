#include "cfrl/csp/csp.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "cfrl/errors.hpp"
#include "cfrl/numkit/serialize.hpp"

namespace cfrl::csp {

Vector PretrainedPolicy::act(std::span<const double> s, Rng& rng) const {
    Vector a = numkit::mlp_forward(actor, s);
    if (!greedy) {
        for (auto& x : a) x = std::clamp(x + explore_noise * rng.normal(), -1.0, 1.0);
    }
    return a;
}

std::uint64_t PretrainedPolicy::hash() const { return numkit::mlp_hash(actor); }

std::uint64_t CspPolicy::hash() const { return numkit::mlp_hash(agent.actor); }

std::vector<std::string> CspTrainerConfig::problems(std::string_view prefix) const {
    std::vector<std::string> out = agent.problems(std::string(prefix) + "agent.");
    const std::string p(prefix);
    if (steps_per_episode < 1) out.push_back(p + "steps_per_episode must be >= 1");
    if (!(novelty_bonus >= 0.0) || !std::isfinite(novelty_bonus)) {
        out.push_back(p + "novelty_bonus must be finite and >= 0");
    }
    return out;
}

void CspTrainerConfig::validate() const {
    const auto list = problems();
    if (list.empty()) return;
    std::string msg;
    for (const auto& s : list) msg += (msg.empty() ? "" : "; ") + s;
    throw ConfigError(msg);
}

PretrainResult pretrain_policy(const envsim::EnvConfig& env_config, const AgentConfig& agent_config,
                               std::size_t budget, std::uint64_t seed, std::size_t eval_episodes) {
    agents::TrainOptions options;
    options.episodes = budget;
    options.eval_every = std::max<std::size_t>(budget, 1);
    options.eval_episodes = eval_episodes;
    auto run = agents::train_agent(agents::AgentKind::ddpg, env_config, agent_config, options, seed);

    PretrainResult out;
    out.policy.actor = run.agent.actor;
    out.policy.explore_noise = agent_config.explore_noise;
    out.metrics = std::move(run.metrics);
    out.agent = std::move(run.agent);
    const auto eval = agents::evaluate_agent(out.agent, env_config, eval_episodes, agents::eval_seed_for(seed));
    out.eval_avg_reward = eval.avg_reward;
    out.eval_ctr = eval.ctr;
    return out;
}

double csp_reward(double r_factual, double r_counterfactual) {
    return -std::abs(r_counterfactual - r_factual);
}

CspStepRecord csp_training_step(envsim::Env& env, const PretrainedPolicy& pi_o, const CspPolicy& csp,
                                const CspTrainerConfig& config, bool explore, Rng& explore_rng,
                                Rng& pi_o_rng) {
    CspStepRecord rec;
    const envsim::EnvSnapshot at_t = env.snapshot();
    rec.state = env.observe();

    rec.factual_action = pi_o.act(rec.state, pi_o_rng);
    const auto factual = env.step(rec.factual_action);
    rec.factual_reward = factual.reward;
    rec.factual_next = factual.next_state;
    const envsim::EnvSnapshot at_next = env.snapshot();

    rec.csp_action = agents::select_action(csp.agent, rec.state, explore, explore_rng);
    const auto counterfactual = env.intervene(at_t, rec.csp_action);
    rec.counterfactual_state = counterfactual.next_state;

    // The probe replays U_{t+1} with s_t replaced by s_c, so r_{o,c} and
    // r_{o,t+1} differ only through the state.
    envsim::EnvSnapshot probe = at_t;
    probe.state.interest = rec.counterfactual_state;
    env.restore(probe);
    const Vector probe_action = pi_o.act(rec.counterfactual_state, pi_o_rng);
    rec.probe_reward = env.step(probe_action).reward;
    env.restore(at_next);

    if (!std::isfinite(rec.factual_reward) || !std::isfinite(rec.probe_reward)) {
        throw NumericError("non-finite reward in CSP training step");
    }
    rec.abs_dr = std::abs(rec.probe_reward - rec.factual_reward);
    double reward = csp_reward(rec.factual_reward, rec.probe_reward);
    if (config.novelty_bonus > 0.0) {
        double sq = 0.0;
        for (std::size_t i = 0; i < rec.csp_action.size(); ++i) {
            const double d = rec.csp_action[i] - rec.factual_action[i];
            sq += d * d;
        }
        reward += config.novelty_bonus * std::sqrt(sq);
    }

    rec.transition.s = rec.state;
    rec.transition.a = rec.csp_action;
    rec.transition.r = reward;
    rec.transition.s_next = rec.counterfactual_state;
    rec.transition.done = factual.done;
    rec.transition.provenance = agents::Provenance::counterfactual;
    return rec;
}

CspTrainResult train_csp(const envsim::EnvConfig& env_config, const PretrainedPolicy& pi_o,
                         const CspTrainerConfig& config, std::uint64_t seed) {
    env_config.validate();
    config.validate();
    numkit::require_dim(pi_o.actor.in_dim(), env_config.state_dim, "pretrained policy input");
    numkit::require_dim(pi_o.actor.out_dim(), env_config.action_dim, "pretrained policy output");

    const Rng master(seed);
    Rng init_rng = master.fork("init");
    Rng explore_rng = master.fork("explore");
    Rng update_rng = master.fork("update");
    Rng pi_o_rng = master.fork("pi-o");
    const Rng env_streams = master.fork("env");

    CspTrainResult result;
    result.csp.agent = agents::make_agent(agents::AgentKind::ddpg, config.agent, env_config.state_dim,
                                          env_config.action_dim, init_rng);
    result.csp.pi_o_hash = pi_o.hash();
    PretrainedPolicy probe = pi_o;
    probe.greedy = config.greedy_pretrained;

    agents::ReplayBuffer buffer(config.agent.buffer_capacity);
    const std::size_t learning_starts = std::max<std::size_t>(config.agent.learning_starts, 1);
    for (std::size_t ep = 0; ep < config.episodes; ++ep) {
        envsim::Env env(env_config, env_streams.fork("episode", ep).next_u64());
        CspLogRow row;
        row.episode = ep + 1;
        std::size_t steps = 0;
        std::size_t updates = 0;
        while (!env.done() && steps < config.steps_per_episode) {
            result.factual_states.push_back(env.observe());
            auto rec = csp_training_step(env, probe, result.csp, config, true, explore_rng, pi_o_rng);
            row.mean_abs_dr += rec.abs_dr;
            buffer.push(std::move(rec.transition));
            ++steps;
            if (buffer.size() >= learning_starts) {
                const auto batch = buffer.sample(config.agent.batch_size, update_rng);
                const auto losses = agents::agent_update(result.csp.agent, batch, update_rng);
                row.critic_loss += losses.critic_loss;
                row.actor_loss += losses.actor_loss;
                ++updates;
            }
        }
        if (steps > 0) row.mean_abs_dr /= static_cast<double>(steps);
        if (updates > 0) {
            row.critic_loss /= static_cast<double>(updates);
            row.actor_loss /= static_cast<double>(updates);
        }
        result.log.push_back(row);
    }
    return result;
}

double evaluate_csp(const envsim::EnvConfig& env_config, const PretrainedPolicy& pi_o, const CspPolicy& csp,
                    const CspTrainerConfig& config, std::size_t episodes, std::uint64_t seed) {
    if (episodes == 0) return 0.0;
    std::vector<double> per_episode(episodes, 0.0);
    kernels::for_each_index(episodes, [&](std::size_t k) {
        Rng unused = Rng(seed).fork("csp-eval-explore", k);
        Rng pi_o_rng = Rng(seed).fork("csp-eval-pi-o", k);
        PretrainedPolicy probe = pi_o;
        probe.greedy = config.greedy_pretrained;
        envsim::Env env(env_config, kernels::eval_episode_seed(seed, k));
        double total = 0.0;
        std::size_t steps = 0;
        while (!env.done() && steps < config.steps_per_episode) {
            total += csp_training_step(env, probe, csp, config, false, unused, pi_o_rng).abs_dr;
            ++steps;
        }
        per_episode[k] = steps > 0 ? total / static_cast<double>(steps) : 0.0;
    });
    double sum = 0.0;
    for (double v : per_episode) sum += v;
    return sum / static_cast<double>(episodes);
}

std::string csp_log_csv(const std::vector<CspLogRow>& rows) {
    std::ostringstream out;
    out << "episode,mean_abs_dr,csp_critic_loss,csp_actor_loss\n";
    char line[256];
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g\n", r.episode, r.mean_abs_dr, r.critic_loss,
                      r.actor_loss);
        out << line;
    }
    return out.str();
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return buf;
}

void save_pretrained(const PretrainResult& pretrained, const std::filesystem::path& dir,
                     const nlohmann::json& extra) {
    nlohmann::json manifest = extra;
    manifest["role"] = "pretrained_policy";
    manifest["policy_hash"] = hash_hex(pretrained.policy.hash());
    manifest["eval_avg_reward"] = pretrained.eval_avg_reward;
    manifest["eval_ctr"] = pretrained.eval_ctr;
    agents::save_agent(pretrained.agent, dir, manifest);
}

PretrainedPolicy load_pretrained(const std::filesystem::path& dir) {
    auto loaded = agents::load_agent(dir);
    if (loaded.manifest.value("role", "") != "pretrained_policy" || loaded.agent.kind != agents::AgentKind::ddpg) {
        throw ArtifactError(dir.string() + " is not a pretrained-policy checkpoint");
    }
    PretrainedPolicy p;
    p.actor = std::move(loaded.agent.actor);
    p.explore_noise = loaded.agent.config.explore_noise;
    return p;
}

void save_csp(const CspPolicy& csp, const std::filesystem::path& dir, const nlohmann::json& extra) {
    nlohmann::json manifest = extra;
    manifest["role"] = "csp";
    manifest["pi_o_hash"] = hash_hex(csp.pi_o_hash);
    manifest["csp_hash"] = hash_hex(csp.hash());
    agents::save_agent(csp.agent, dir, manifest);
}

CspPolicy load_csp(const std::filesystem::path& dir) {
    auto loaded = agents::load_agent(dir);
    if (loaded.manifest.value("role", "") != "csp" || loaded.agent.kind != agents::AgentKind::ddpg) {
        throw ArtifactError(dir.string() + " is not a CSP checkpoint");
    }
    CspPolicy csp;
    csp.agent = std::move(loaded.agent);
    try {
        csp.pi_o_hash = std::stoull(loaded.manifest.at("pi_o_hash").get<std::string>(), nullptr, 16);
    } catch (const std::exception& e) {
        throw ArtifactError("CSP checkpoint " + dir.string() + " has a malformed pi_o_hash");
    }
    if (hash_hex(csp.hash()) != loaded.manifest.value("csp_hash", "")) {
        throw ArtifactError("CSP checkpoint " + dir.string() + " failed its content hash check");
    }
    return csp;
}

}  // namespace cfrl::csp
