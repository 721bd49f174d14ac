#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cfrl/csp/csp.hpp"
#include "cfrl/errors.hpp"
#include "oracle.hpp"

using namespace cfrl;
using namespace cfrl::csp;
using numkit::Activation;

namespace {

AgentConfig small_agent_config() {
    AgentConfig c;
    c.hidden = {16, 16};
    return c;
}

PretrainedPolicy random_policy(const envsim::EnvConfig& env, std::uint64_t seed) {
    Rng rng(seed);
    const std::vector<std::size_t> dims{env.state_dim, 16, env.action_dim};
    PretrainedPolicy p;
    p.actor = numkit::make_mlp(dims, Activation::relu, Activation::tanh, rng);
    return p;
}

CspPolicy fresh_csp(const envsim::EnvConfig& env, const PretrainedPolicy& pi_o, std::uint64_t seed) {
    Rng rng(seed);
    CspPolicy csp;
    csp.agent = agents::make_agent(agents::AgentKind::ddpg, small_agent_config(), env.state_dim, env.action_dim, rng);
    csp.pi_o_hash = pi_o.hash();
    return csp;
}

// Makes the CSP emit `a` regardless of state.
void force_constant_action(CspPolicy& csp, const Vector& a) {
    auto& out = csp.agent.actor.layers.back();
    for (auto& w : out.weight.data()) w = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) out.bias[i] = std::atanh(a[i]);
}

std::vector<double> to_std(std::span<const double> v) { return {v.begin(), v.end()}; }

}  // namespace

TEST_CASE("csp reward is minus the absolute reward gap") {
    CHECK(csp_reward(3.0, 5.0) == -2.0);
    CHECK(csp_reward(5.0, 3.0) == -2.0);
    CHECK(csp_reward(4.0, 4.0) == 0.0);
    CHECK(csp_reward(0.0, 10.0) == -10.0);
}

TEST_CASE("training step matches a longhand oracle of factual, intervention and probe") {
    envsim::EnvConfig cfg;
    const auto pi_o = random_policy(cfg, 3);
    CspPolicy csp = fresh_csp(cfg, pi_o, 4);
    CspTrainerConfig tc;
    envsim::Env env(cfg, 42);
    oracle::Env ref(42, cfg.projection_seed);
    Rng explore(1), pi_o_rng(2);

    for (int t = 0; t < 5; ++t) {
        CAPTURE(t);
        const auto rec = csp_training_step(env, pi_o, csp, tc, false, explore, pi_o_rng);

        const auto a_o = to_std(numkit::mlp_forward(pi_o.actor, ref.interest));
        const auto a_c = to_std(agents::greedy_action(csp.agent, ref.interest));
        oracle::Env factual = ref, counterfactual = ref, probe = ref;
        const double r_f = factual.step(a_o);
        counterfactual.step(a_c);
        probe.interest = counterfactual.interest;
        const double r_oc = probe.step(to_std(numkit::mlp_forward(pi_o.actor, counterfactual.interest)));

        CHECK(rec.factual_reward == r_f);
        CHECK(rec.probe_reward == r_oc);
        CHECK(rec.transition.r == -std::abs(r_oc - r_f));
        CHECK(rec.abs_dr == std::abs(r_oc - r_f));
        CHECK(rec.transition.provenance == agents::Provenance::counterfactual);
        for (std::size_t i = 0; i < cfg.state_dim; ++i) {
            CHECK(rec.counterfactual_state[i] == doctest::Approx(counterfactual.interest[i]).epsilon(1e-12));
            CHECK(env.state().interest[i] == doctest::Approx(factual.interest[i]).epsilon(1e-12));
        }
        CHECK(rec.transition.s_next == rec.counterfactual_state);
        CHECK(env.state().step == static_cast<std::size_t>(t + 1));
        ref = factual;
    }
}

TEST_CASE("brute-force action grid agrees with the oracle; the factual action reproduces s_t+1") {
    envsim::EnvConfig cfg;
    cfg.action_dim = 1;
    cfg.state_dim = 4;
    const auto pi_o = random_policy(cfg, 5);
    CspPolicy csp = fresh_csp(cfg, pi_o, 6);
    CspTrainerConfig tc;
    envsim::Env env(cfg, 9);
    for (int t = 0; t < 3; ++t) env.step(Vector{0.2});
    const auto snap = env.snapshot();

    const Vector a_o = numkit::mlp_forward(pi_o.actor, env.observe());
    double best = -INFINITY;
    for (int g = -10; g <= 10; ++g) {
        const double a = 0.095 * g;
        force_constant_action(csp, Vector{a});
        env.restore(snap);
        Rng explore(1), pi_o_rng(2);
        const auto rec = csp_training_step(env, pi_o, csp, tc, false, explore, pi_o_rng);
        CHECK(rec.csp_action[0] == doctest::Approx(a).epsilon(1e-12));

        envsim::Env scratch(cfg, 0);
        const auto f = scratch.intervene(snap, a_o);
        const auto c = scratch.intervene(snap, Vector{a});
        auto probe = snap;
        probe.state.interest = c.next_state;
        const auto p = scratch.intervene(probe, numkit::mlp_forward(pi_o.actor, c.next_state));
        CHECK(rec.transition.r == -std::abs(p.reward - f.reward));
        CHECK(rec.transition.r <= 0.0);
        best = std::max(best, rec.transition.r);
    }
    force_constant_action(csp, a_o);
    env.restore(snap);
    Rng explore(1), pi_o_rng(2);
    const auto identity = csp_training_step(env, pi_o, csp, tc, false, explore, pi_o_rng);
    CHECK(identity.counterfactual_state == identity.factual_next);
    CHECK(identity.transition.r <= 0.0);
    CHECK(best <= 0.0);
}

TEST_CASE("training never touches pi_o and logs one row per episode") {
    envsim::EnvConfig cfg;
    cfg.episode_len = 10;
    const auto pi_o = random_policy(cfg, 7);
    const auto before = pi_o.hash();
    CspTrainerConfig tc;
    tc.episodes = 3;
    tc.agent = small_agent_config();
    const auto result = train_csp(cfg, pi_o, tc, 11);
    CHECK(pi_o.hash() == before);
    CHECK(result.csp.pi_o_hash == before);
    REQUIRE(result.log.size() == 3);
    CHECK(result.log[2].episode == 3);
    CHECK(result.factual_states.size() == 30);
    for (const auto& row : result.log) {
        CHECK(row.mean_abs_dr >= 0.0);
        CHECK(std::isfinite(row.critic_loss));
    }
    const auto again = train_csp(cfg, pi_o, tc, 11);
    CHECK(again.csp.agent.actor == result.csp.agent.actor);

    tc.episodes = 0;
    const auto empty = train_csp(cfg, pi_o, tc, 11);
    CHECK(empty.log.empty());
    CHECK(csp_log_csv(empty.log) == "episode,mean_abs_dr,csp_critic_loss,csp_actor_loss\n");
}

TEST_CASE("factual states seen during CSP training equal pi_o running alone") {
    envsim::EnvConfig cfg;
    cfg.episode_len = 12;
    const auto pi_o = random_policy(cfg, 8);
    CspTrainerConfig tc;
    tc.episodes = 2;
    tc.agent = small_agent_config();
    const std::uint64_t seed = 21;
    const auto result = train_csp(cfg, pi_o, tc, seed);

    std::vector<Vector> alone;
    const Rng env_streams = Rng(seed).fork("env");
    for (std::size_t ep = 0; ep < tc.episodes; ++ep) {
        envsim::Env env(cfg, env_streams.fork("episode", ep).next_u64());
        while (!env.done()) {
            alone.push_back(env.observe());
            env.step(numkit::mlp_forward(pi_o.actor, env.observe()));
        }
    }
    CHECK(result.factual_states == alone);
}

TEST_CASE("without drift or noise the probe always matches the factual reward") {
    envsim::EnvConfig cfg;
    cfg.drift = 0.0;
    cfg.noise = 0.0;
    cfg.episode_len = 10;
    const auto pi_o = random_policy(cfg, 9);
    CspTrainerConfig tc;
    tc.episodes = 3;
    tc.agent = small_agent_config();
    const auto result = train_csp(cfg, pi_o, tc, 4);
    for (const auto& row : result.log) CHECK(row.mean_abs_dr == 0.0);
    CHECK(evaluate_csp(cfg, pi_o, result.csp, tc, 3, 5) == 0.0);
}

TEST_CASE("novelty bonus adds lambda times the action distance") {
    envsim::EnvConfig cfg;
    const auto pi_o = random_policy(cfg, 10);
    CspPolicy csp = fresh_csp(cfg, pi_o, 11);
    CspTrainerConfig plain, bonus;
    bonus.novelty_bonus = 0.5;
    envsim::Env e1(cfg, 3), e2(cfg, 3);
    Rng x1(1), p1(2), x2(1), p2(2);
    const auto a = csp_training_step(e1, pi_o, csp, plain, false, x1, p1);
    const auto b = csp_training_step(e2, pi_o, csp, bonus, false, x2, p2);
    double sq = 0.0;
    for (std::size_t i = 0; i < a.csp_action.size(); ++i) {
        sq += (a.csp_action[i] - a.factual_action[i]) * (a.csp_action[i] - a.factual_action[i]);
    }
    CHECK(b.transition.r == doctest::Approx(a.transition.r + 0.5 * std::sqrt(sq)).epsilon(1e-14));
    bonus.novelty_bonus = -1.0;
    CHECK_THROWS_AS(bonus.validate(), ConfigError);
}

TEST_CASE("pretraining and checkpoints round trip with hash checks") {
    envsim::EnvConfig cfg;
    cfg.episode_len = 10;
    const auto pre = pretrain_policy(cfg, small_agent_config(), 2, 3, 2);
    CHECK(std::isfinite(pre.eval_avg_reward));
    CHECK(pre.policy.actor == pre.agent.actor);

    const auto root = std::filesystem::temp_directory_path() / "cfrl_csp_ckpt";
    std::filesystem::remove_all(root);
    save_pretrained(pre, root / "pre");
    const auto loaded = load_pretrained(root / "pre");
    CHECK(loaded.hash() == pre.policy.hash());

    CspTrainerConfig tc;
    tc.episodes = 1;
    tc.agent = small_agent_config();
    const auto trained = train_csp(cfg, loaded, tc, 1);
    save_csp(trained.csp, root / "csp");
    const auto csp = load_csp(root / "csp");
    CHECK(csp.hash() == trained.csp.hash());
    CHECK(csp.pi_o_hash == pre.policy.hash());

    CHECK_THROWS_AS(load_csp(root / "pre"), ArtifactError);
    CHECK_THROWS_AS(load_pretrained(root / "csp"), ArtifactError);
    CHECK_THROWS_AS(load_csp(root / "missing"), ArtifactError);

    // A tampered actor no longer matches the recorded content hash.
    auto tampered = trained.csp;
    tampered.agent.actor.layers[0].bias[0] += 1.0;
    agents::save_agent(tampered.agent, root / "bad", {{"role", "csp"}, {"pi_o_hash", hash_hex(csp.pi_o_hash)},
                                                      {"csp_hash", hash_hex(trained.csp.hash())}});
    CHECK_THROWS_AS(load_csp(root / "bad"), ArtifactError);
    std::filesystem::remove_all(root);
    CHECK(hash_hex(0xabc) == "0000000000000abc");
}
