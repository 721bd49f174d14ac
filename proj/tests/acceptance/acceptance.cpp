// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails. Optional arguments: --out DIR, --only SUBSTRING.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cfrl/augment/augment.hpp"
#include "cfrl/harness/harness.hpp"
#include "cfrl/kernels/parallel.hpp"
#include "cfrl/numkit/serialize.hpp"
#include "gradcheck.hpp"

using namespace cfrl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    std::string name;
    std::function<Outcome(const fs::path&)> run;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome gradient_soundness(const fs::path&) {
    const auto t0 = std::chrono::steady_clock::now();
    numkit::Rng rng(2024);
    double worst = 0.0;
    std::size_t failures = 0, checked = 0;
    for (int k = 0; k < 100; ++k) {
        const auto r = gradcheck::check_random_mlp(rng, 1e-5);
        worst = std::max(worst, r.worst);
        checked += r.checked;
        failures += r.worst >= 1e-4;
    }
    const double secs = seconds_since(t0);
    return {failures == 0 && secs < 60.0,
            fmt("100 nets, %zu gradients, worst rel err %.3g, %.2fs", checked, worst, secs)};
}

Outcome counterfactual_consistency(const fs::path&) {
    envsim::EnvConfig cfg;
    numkit::Rng rng(99);
    std::size_t failures = 0;
    for (int k = 0; k < 1000; ++k) {
        envsim::Env env(cfg, rng.next_u64());
        const std::size_t warmup = rng.next_u64() % cfg.episode_len;
        for (std::size_t t = 0; t < warmup; ++t) env.step(envsim::random_action(cfg.action_dim, rng));
        auto snap = env.snapshot();
        // Random state on the unit sphere.
        double sq = 0.0;
        for (auto& x : snap.state.interest) {
            x = rng.normal();
            sq += x * x;
        }
        for (auto& x : snap.state.interest) x /= std::sqrt(sq);
        env.restore(snap);
        const auto action = envsim::random_action(cfg.action_dim, rng);
        const auto factual = env.step(action);
        const auto after = env.snapshot();
        const auto replay = env.intervene(snap, action);
        failures += !(replay == factual) || !(env.snapshot() == after);
    }
    return {failures == 0, fmt("1000 triples, %zu mismatches", failures)};
}

Outcome bellman_oracle(const fs::path&) {
    using numkit::Activation;
    agents::AgentConfig cfg;
    cfg.hidden = {2};
    numkit::Rng rng(0);
    auto agent = agents::make_agent(agents::AgentKind::ddpg, cfg, 2, 1, rng);
    auto dense = [](std::size_t out, std::size_t in, std::vector<double> w, std::vector<double> b, Activation act) {
        numkit::Layer l{numkit::Matrix(out, in), std::move(b), act};
        l.weight.data() = std::move(w);
        return l;
    };
    agent.actor_target.layers = {dense(2, 2, {0.5, -0.3, 0.2, 0.8}, {0.1, -0.1}, Activation::relu),
                                 dense(1, 2, {0.6, -0.4}, {0.05}, Activation::tanh)};
    agent.critics[0].target.layers = {dense(2, 3, {0.3, -0.2, 0.5, -0.4, 0.1, 0.7}, {0.0, 0.2}, Activation::relu),
                                      dense(1, 2, {1.1, -0.9}, {0.3}, Activation::identity)};
    agents::Transition t{{1.0, 0.0}, {0.0}, 1.0, {0.0, 1.0}, false, agents::Provenance::factual};

    const double a_next = std::tanh(0.6 * 0.0 - 0.4 * 0.7 + 0.05);
    const double h1 = std::max(0.0, -0.2 + 0.5 * a_next);
    const double h2 = std::max(0.0, 0.1 + 0.7 * a_next + 0.2);
    const double hand = 1.0 + 0.95 * (1.1 * h1 - 0.9 * h2 + 0.3);
    const double got = agents::ddpg_critic_target(agent, t);

    agent.config.gamma = 0.0;
    const bool gamma0 = agents::ddpg_critic_target(agent, t) == t.r;
    agent.config.gamma = 0.95;
    t.done = true;
    const bool done = agents::ddpg_critic_target(agent, t) == t.r;
    const double err = std::abs(got - hand);
    return {err <= 1e-12 && gamma0 && done,
            fmt("y=%.17g hand=%.17g |err|=%.3g gamma0=%d done=%d", got, hand, err, gamma0, done)};
}

struct ParamTrace : agents::StepObserver {
    std::vector<std::uint64_t> hashes;
    void on_step(const agents::Transition&, const agents::Agent& agent) override {
        std::uint64_t h = numkit::mlp_hash(agent.actor);
        for (const auto& c : agent.critics) h = h * 1099511628211ULL ^ numkit::mlp_hash(c.net);
        hashes.push_back(h);
    }
};

Outcome determinism(const fs::path& root) {
    harness::RunConfig c;
    c.output_dir = (root / "determinism").string();
    c.budget = 20;
    c.eval_every = 5;
    c.agent.hidden = {32, 32};
    std::ostringstream sink;
    const fs::path csv = harness::Layout{c.output_dir}.train(c.kind, false, 1) / "metrics.csv";
    harness::cmd_train(c, sink);
    const std::string first = read_file(csv);
    harness::cmd_train(c, sink);
    const bool csv_same = !first.empty() && read_file(csv) == first;

    bool traj_same = true;
    agents::TrainOptions opt;
    opt.episodes = 10;
    opt.eval_every = 5;
    for (auto kind : {agents::AgentKind::ddpg, agents::AgentKind::td3, agents::AgentKind::sac}) {
        ParamTrace plain, off;
        const auto a = agents::train_agent(kind, c.env, c.agent, opt, 3, nullptr, &plain);
        const auto b = augment::train_with_augmentation(kind, c.env, c.agent, augment::AugmentConfig{}, opt, 3,
                                                        nullptr, &off);
        traj_same = traj_same && plain.hashes == off.hashes && a.agent.actor == b.agent.actor &&
                    plain.hashes.size() == 500;
    }
    return {csv_same && traj_same,
            fmt("metrics csv byte-identical=%d, disabled-augmentation trajectories identical=%d", csv_same, traj_same)};
}

Outcome learning_sanity(const fs::path&) {
    const auto t0 = std::chrono::steady_clock::now();
    envsim::EnvConfig env;
    agents::AgentConfig cfg;
    const std::size_t seeds = 5;
    std::vector<double> random(seeds), best(seeds), episodes(seeds);
    kernels::for_each_index(seeds, [&](std::size_t i) {
        const std::uint64_t seed = i + 1;
        random[i] = agents::evaluate_random(env, 10, agents::eval_seed_for(seed)).avg_reward;
        agents::TrainOptions opt;
        opt.episodes = 2000;
        opt.eval_every = 50;
        opt.eval_episodes = 10;
        opt.stop_at_reward = 2.0 * random[i];
        const auto r = agents::train_agent(agents::AgentKind::ddpg, env, cfg, opt, seed);
        for (const auto& row : r.metrics) best[i] = std::max(best[i], row.eval_avg_reward);
        episodes[i] = static_cast<double>(r.episodes_run);
    });
    std::size_t ok = 0;
    std::string detail;
    for (std::size_t i = 0; i < seeds; ++i) {
        ok += best[i] >= 2.0 * random[i];
        detail += fmt("seed %zu: %.1f vs random %.1f at ep %.0f; ", i + 1, best[i], random[i], episodes[i]);
    }
    const double secs = seconds_since(t0);
    return {ok >= 4 && secs < 600.0, fmt("%zu/5 seeds reach 2x random, %.0fs; ", ok, secs) + detail};
}

harness::RunConfig csp_run_config(const fs::path& root) {
    harness::RunConfig c;
    c.output_dir = root.string();
    c.pretrain_budget = 100;
    c.seeds = {1, 2, 3, 4, 5};
    return c;
}

Outcome csp_objective(const fs::path& root) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto c = csp_run_config(root / "csp");
    std::vector<double> head(c.seeds.size()), tail(c.seeds.size());
    kernels::for_each_index(c.seeds.size(), [&](std::size_t i) {
        const auto pre = csp::pretrain_policy(c.env, c.agent, c.pretrain_budget, c.seeds[i], c.eval_episodes);
        const auto trained = csp::train_csp(c.env, pre.policy, c.csp, c.seeds[i]);
        std::vector<double> dr;
        for (const auto& row : trained.log) dr.push_back(row.mean_abs_dr);
        head[i] = harness::head_mean(dr);
        tail[i] = harness::tail_mean(dr);
    });
    std::size_t ok = 0;
    std::string detail;
    for (std::size_t i = 0; i < head.size(); ++i) {
        const double ratio = tail[i] / head[i];
        ok += ratio <= 0.7;
        detail += fmt("seed %llu: %.3f -> %.3f (x%.2f); ", static_cast<unsigned long long>(c.seeds[i]), head[i],
                      tail[i], ratio);
    }
    const double secs = seconds_since(t0);
    return {ok >= 3 && secs < 600.0, fmt("%zu/5 seeds at <= 0.7x, %.0fs; ", ok, secs) + detail};
}

Outcome table1_direction(const fs::path& root) {
    const auto t0 = std::chrono::steady_clock::now();
    auto c = csp_run_config(root / "table1");
    c.budget = 2000;
    c.compare_kinds = {agents::AgentKind::ddpg, agents::AgentKind::td3, agents::AgentKind::sac};
    c.compare_budgets = {2000, 500, 500};
    c.augment.enabled = true;
    std::ostringstream out;
    const auto report = harness::cmd_compare(c, out);
    std::cout << out.str();

    std::size_t ddpg_ge = 0;
    for (const auto& a : report.aggregates) {
        if (a.kind == agents::AgentKind::ddpg) ddpg_ge = a.seeds_augmented_ge_baseline;
    }
    const std::string table = out.str();
    const bool shaped = report.aggregates.size() == 3 && table.find("DDPG") != std::string::npos &&
                        table.find("TD3") != std::string::npos && table.find("SAC") != std::string::npos &&
                        table.find("Improvement") != std::string::npos;
    return {ddpg_ge >= 3 && shaped && report.failures.empty(),
            fmt("DDPG augmented >= baseline on %zu/5 seeds, table rows=%zu, failures=%zu, %.0fs", ddpg_ge,
                report.aggregates.size(), report.failures.size(), seconds_since(t0))};
}

Outcome sweep_shape(const fs::path& root) {
    const auto t0 = std::chrono::steady_clock::now();
    auto c = csp_run_config(root / "sweep");
    c.seeds = {1, 2, 3};
    c.csp.episodes = 100;
    c.sweep_hidden = {64, 128, 256};
    std::ostringstream sink;
    for (const auto seed : c.seeds) {
        harness::Overrides o;
        o.seed = seed;
        harness::cmd_pretrain(harness::apply_overrides(c, o), sink);
    }
    const auto rows = harness::cmd_sweep(c, sink);

    const fs::path dir = harness::Layout{c.output_dir}.sweep();
    std::vector<std::vector<std::string>> keys;
    for (const auto h : c.sweep_hidden) {
        std::istringstream in(read_file(dir / ("hidden-" + std::to_string(h) + ".csv")));
        std::vector<std::string> k;
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            // (seed, episode) columns identify the row.
            const auto a = line.find(','), b = line.find(',', a + 1), e = line.find(',', b + 1);
            k.push_back(line.substr(a + 1, e - a - 1));
        }
        keys.push_back(std::move(k));
    }
    bool aligned = !keys[0].empty() && keys[0].size() == c.seeds.size() * c.csp.episodes;
    for (const auto& k : keys) aligned = aligned && k == keys[0];
    std::string detail = fmt("%zu cells, curves aligned=%d, %.0fs; ", rows.size(), aligned, seconds_since(t0));
    for (const auto& r : rows) {
        detail += fmt("h%zu/s%llu eval %.3f; ", r.hidden, static_cast<unsigned long long>(r.seed), r.eval_mean_abs_dr);
    }
    return {rows.size() == 9 && aligned && fs::exists(dir / "aggregate.csv"), detail};
}

Outcome buffer_accounting(const fs::path&) {
    envsim::EnvConfig env;
    env.episode_len = 20;
    agents::AgentConfig cfg;
    cfg.hidden = {16, 16};
    numkit::Rng init(1), csp_init(2);
    const auto agent = agents::make_agent(agents::AgentKind::ddpg, cfg, env.state_dim, env.action_dim, init);
    csp::CspPolicy policy;
    policy.agent = agents::make_agent(agents::AgentKind::ddpg, cfg, env.state_dim, env.action_dim, csp_init);
    augment::AugmentConfig ac;
    ac.enabled = true;

    agents::ReplayBuffer buffer(10000);
    numkit::Rng explore(3), cf(4);
    std::uint64_t steps = 0;
    bool tags = true;
    for (std::uint64_t ep = 0; ep < 5; ++ep) {
        envsim::Env e(env, ep);
        while (!e.done()) {
            auto rec = augment::augmented_step(e, agent, policy, ac, steps, explore, cf);
            tags = tags && rec.factual.provenance == agents::Provenance::factual && rec.counterfactual &&
                   rec.counterfactual->provenance == agents::Provenance::counterfactual;
            buffer.push(rec.factual);
            if (rec.counterfactual) buffer.push(*rec.counterfactual);
            ++steps;
            tags = tags && buffer.size() == 2 * steps;
        }
    }
    for (std::size_t i = 0; i < buffer.size(); ++i) {
        tags = tags && buffer.at(i).provenance ==
                           (i % 2 == 0 ? agents::Provenance::factual : agents::Provenance::counterfactual);
    }

    agents::TrainOptions opt;
    opt.episodes = 5;
    opt.eval_every = 5;
    opt.eval_episodes = 1;
    const auto r = augment::train_with_augmentation(agents::AgentKind::td3, env, cfg, ac, opt, 7, &policy);
    const bool totals = r.buffer_factual == r.env_steps && r.buffer_counterfactual == r.env_steps &&
                        r.buffer_size == 2 * r.env_steps;
    return {tags && totals && buffer.size() == 200,
            fmt("%llu steps -> %zu stored (%zu factual, %zu counterfactual); training run %llu steps -> %zu stored",
                static_cast<unsigned long long>(steps), buffer.size(), buffer.count(agents::Provenance::factual),
                buffer.count(agents::Provenance::counterfactual), static_cast<unsigned long long>(r.env_steps),
                r.buffer_size)};
}

}  // namespace

int main(int argc, char** argv) {
    fs::path root = "acceptance-out";
    std::string only;
    for (int i = 1; i + 1 < argc; i += 2) {
        if (std::strcmp(argv[i], "--out") == 0) root = argv[i + 1];
        if (std::strcmp(argv[i], "--only") == 0) only = argv[i + 1];
    }
    kernels::apply_thread_limit();
    fs::remove_all(root);
    fs::create_directories(root);

    const std::vector<Criterion> criteria{
        {"gradient-soundness", gradient_soundness},
        {"counterfactual-consistency", counterfactual_consistency},
        {"bellman-target-oracle", bellman_oracle},
        {"determinism", determinism},
        {"learning-sanity", learning_sanity},
        {"csp-objective-decrease", csp_objective},
        {"directional-comparison", table1_direction},
        {"sweep-shape", sweep_shape},
        {"buffer-accounting", buffer_accounting},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && c.name.find(only) == std::string::npos) continue;
        Outcome o;
        try {
            o = c.run(root);
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << ": " << o.detail << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
