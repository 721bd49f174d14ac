#include "cfrl/agents/training.hpp"

#include <chrono>
#include <cstdio>
#include <memory>
#include <sstream>

#include "cfrl/errors.hpp"

namespace cfrl::agents {

std::uint64_t eval_seed_for(std::uint64_t seed) { return Rng(seed).fork("eval").next_u64(); }

Transition factual_step(envsim::Env& env, const Agent& agent, Rng& explore_rng) {
    Transition t;
    t.s = env.observe();
    t.a = select_action(agent, t.s, true, explore_rng);
    const auto out = env.step(t.a);
    t.r = out.reward;
    t.s_next = out.next_state;
    t.done = out.done;
    t.provenance = Provenance::factual;
    return t;
}

kernels::EvalResult evaluate_agent(const Agent& agent, const envsim::EnvConfig& env_config,
                                   std::size_t episodes, std::uint64_t seed) {
    return kernels::evaluate(
        env_config, [&agent](std::span<const double> s) { return greedy_action(agent, s); }, episodes,
        seed);
}

kernels::EvalResult evaluate_random(const envsim::EnvConfig& env_config, std::size_t episodes,
                                    std::uint64_t seed) {
    // Per-episode policy streams keep the parallel evaluation deterministic.
    std::vector<kernels::EvalResult> parts(episodes);
    kernels::for_each_index(episodes, [&](std::size_t k) {
        Rng rng = Rng(seed).fork("random-policy", k);
        envsim::Env env(env_config, kernels::eval_episode_seed(seed, k));
        double total = 0.0;
        std::size_t steps = 0;
        while (!env.done()) {
            total += env.step(envsim::random_action(env_config.action_dim, rng)).reward;
            ++steps;
        }
        parts[k] = {total, total / (static_cast<double>(steps) * static_cast<double>(env_config.slots)), 1};
    });
    kernels::EvalResult r;
    r.episodes = episodes;
    if (episodes == 0) return r;
    double reward = 0.0;
    for (const auto& p : parts) reward += p.avg_reward;
    r.avg_reward = reward / static_cast<double>(episodes);
    r.ctr = reward / (static_cast<double>(episodes * env_config.episode_len) *
                      static_cast<double>(env_config.slots));
    return r;
}

TrainResult train_agent(AgentKind kind, const envsim::EnvConfig& env_config,
                        const AgentConfig& agent_config, const TrainOptions& options,
                        std::uint64_t seed, StepHook* hook, StepObserver* observer) {
    env_config.validate();
    agent_config.validate();
    if (options.eval_every == 0) throw ConfigError("eval_every must be >= 1");

    const auto started = std::chrono::steady_clock::now();
    const Rng master(seed);
    Rng init_rng = master.fork("init");
    Rng explore_rng = master.fork("explore");
    Rng update_rng = master.fork("update");
    const Rng env_streams = master.fork("env");
    const std::uint64_t eval_seed = eval_seed_for(seed);

    TrainResult result{make_agent(kind, agent_config, env_config.state_dim, env_config.action_dim, init_rng),
                       {}, 0, 0, 0, 0, 0};
    Agent& agent = result.agent;
    ReplayBuffer buffer(agent_config.buffer_capacity);
    const std::size_t learning_starts = std::max<std::size_t>(agent_config.learning_starts, 1);

    const auto record = [&](std::size_t episodes_done) {
        const auto eval = evaluate_agent(agent, env_config, options.eval_episodes, eval_seed);
        MetricsRow row;
        row.episode = episodes_done;
        row.env_steps = result.env_steps;
        row.eval_avg_reward = eval.avg_reward;
        row.eval_ctr = eval.ctr;
        row.buffer_size = buffer.size();
        row.buffer_cf_fraction =
            buffer.empty() ? 0.0
                           : static_cast<double>(buffer.count(Provenance::counterfactual)) /
                                 static_cast<double>(buffer.size());
        row.wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
        result.metrics.push_back(row);
        return eval.avg_reward;
    };
    for (std::size_t ep = 0; ep < options.episodes; ++ep) {
        envsim::Env env(env_config, env_streams.fork("episode", ep).next_u64());
        while (!env.done()) {
            const envsim::EnvSnapshot before = hook ? env.snapshot() : envsim::EnvSnapshot{};
            Transition factual = factual_step(env, agent, explore_rng);
            if (observer) observer->on_step(factual, agent);
            std::optional<Transition> extra;
            if (hook) extra = hook->after_factual(env, before, agent, factual, result.env_steps);
            buffer.push(std::move(factual));
            if (extra) buffer.push(std::move(*extra));
            ++result.env_steps;

            if (buffer.size() >= learning_starts) {
                const auto batch = buffer.sample(agent_config.batch_size, update_rng);
                agent_update(agent, batch, update_rng);
            }
        }
        result.episodes_run = ep + 1;

        if ((ep + 1) % options.eval_every == 0 || ep + 1 == options.episodes) {
            const double reward = record(ep + 1);
            if (options.stop_at_reward && reward >= *options.stop_at_reward) break;
        }
    }
    result.buffer_size = buffer.size();
    result.buffer_factual = buffer.count(Provenance::factual);
    result.buffer_counterfactual = buffer.count(Provenance::counterfactual);
    return result;
}

std::string metrics_csv(const std::string& run_id, const std::vector<MetricsRow>& rows) {
    std::ostringstream out;
    out << "run_id,episode,env_steps,eval_avg_reward,eval_ctr,buffer_size,buffer_cf_fraction,wall_ms\n";
    char line[512];
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%s,%zu,%llu,%.17g,%.17g,%zu,%.17g,%.3f\n", run_id.c_str(), r.episode,
                      static_cast<unsigned long long>(r.env_steps), r.eval_avg_reward, r.eval_ctr, r.buffer_size,
                      r.buffer_cf_fraction, r.wall_ms);
        out << line;
    }
    return out.str();
}

}  // namespace cfrl::agents
