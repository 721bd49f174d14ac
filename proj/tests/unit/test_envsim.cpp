#include <doctest.h>

#include <cmath>

#include "cfrl/envsim/env.hpp"
#include "cfrl/errors.hpp"
#include "oracle.hpp"

using namespace cfrl;
using namespace cfrl::envsim;

namespace {

Vector fixed_action(std::size_t m) {
    Vector a(m);
    for (std::size_t i = 0; i < m; ++i) a[i] = 0.9 - 0.25 * static_cast<double>(i);
    return a;
}

Vector random_unit(std::size_t n, Rng& rng) {
    Vector v(n);
    double sq = 0.0;
    for (auto& x : v) {
        x = rng.normal();
        sq += x * x;
    }
    for (auto& x : v) x /= std::sqrt(sq);
    return v;
}

}  // namespace

TEST_CASE("config: defaults, bounds and fingerprint") {
    EnvConfig c;
    CHECK(c.state_dim == 16);
    CHECK(c.action_dim == 8);
    CHECK(c.slots == 10);
    CHECK(c.drift == 0.3);
    CHECK(c.noise == 0.05);
    CHECK(c.click_gain == 4.0);
    CHECK(c.click_bias == -1.0);
    CHECK(c.episode_len == 50);
    CHECK(c.problems().empty());

    EnvConfig bad;
    bad.drift = 1.5;
    bad.noise = -1.0;
    bad.episode_len = 0;
    CHECK(bad.problems().size() == 3);
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK_THROWS_AS(Env(bad, 1), ConfigError);

    EnvConfig other;
    other.slots = 11;
    CHECK(other.fingerprint() != c.fingerprint());
    CHECK(EnvConfig{}.fingerprint() == c.fingerprint());
}

TEST_CASE("projection: unit-norm columns, fixed per projection seed") {
    EnvConfig c;
    const Matrix w = make_projection(c);
    CHECK(w.rows() == 16);
    CHECK(w.cols() == 8);
    for (std::size_t col = 0; col < w.cols(); ++col) {
        double sq = 0.0;
        for (std::size_t r = 0; r < w.rows(); ++r) sq += w(r, col) * w(r, col);
        CHECK(std::sqrt(sq) == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(make_projection(c) == w);
    EnvConfig c2;
    c2.projection_seed = 8;
    CHECK(!(make_projection(c2) == w));
}

TEST_CASE("reset: deterministic, unit norm, seed-sensitive") {
    EnvConfig c;
    Env a(c, 17), b(c, 17);
    CHECK(a.state() == b.state());
    CHECK(a.state().step == 0);
    CHECK(numkit::norm2(a.state().interest) == doctest::Approx(1.0).epsilon(1e-12));
    for (std::uint64_t s = 0; s < 100; ++s) {
        CHECK(Env(c, 2 * s).state().interest != Env(c, 2 * s + 1).state().interest);
    }
}

TEST_CASE("step: matches the longhand oracle for a full episode") {
    EnvConfig c;
    Env env(c, 42);
    oracle::Env ref(42, c.projection_seed);
    for (std::size_t i = 0; i < c.state_dim; ++i) CHECK(env.state().interest[i] == doctest::Approx(ref.interest[i]).epsilon(1e-14));
    const Vector a = fixed_action(c.action_dim);
    for (std::size_t t = 0; t < c.episode_len; ++t) {
        const auto out = env.step(a);
        const double r = ref.step(a);
        CHECK(out.reward == r);
        CHECK(out.ctr == r / 10.0);
        for (std::size_t i = 0; i < c.state_dim; ++i) CHECK(out.next_state[i] == doctest::Approx(ref.interest[i]).epsilon(1e-12));
        CHECK(out.done == (t + 1 == c.episode_len));
    }
}

TEST_CASE("step: first transition from seed 42 equals the frozen oracle values") {
    EnvConfig c;
    Env env(c, 42);
    const auto out = env.step(fixed_action(c.action_dim));
    CHECK(out.reward == 3.0);
    CHECK(out.next_state[0] == doctest::Approx(0.54082012570173943).epsilon(1e-12));
    CHECK(out.next_state[15] == doctest::Approx(0.17181607075312505).epsilon(1e-12));
}

TEST_CASE("step: bounds, unit norm and termination") {
    EnvConfig c;
    c.episode_len = 7;
    Env env(c, 3);
    Rng rng(9);
    while (!env.done()) {
        const auto out = env.step(random_action(c.action_dim, rng));
        CHECK(out.reward >= 0.0);
        CHECK(out.reward <= 10.0);
        CHECK(out.reward == std::floor(out.reward));
        CHECK(out.ctr == out.reward / 10.0);
        CHECK(numkit::norm2(out.next_state) == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK(env.state().step == 7);
    CHECK_THROWS_AS(env.step(Vector(8, 0.0)), StateError);

    Env fresh(c, 3);
    CHECK_THROWS_AS(fresh.step(Vector(3, 0.0)), DimensionError);
    Vector nan_action(8, 0.0);
    nan_action[2] = NAN;
    CHECK_THROWS_AS(fresh.step(nan_action), NumericError);
}

TEST_CASE("step: no drift and no noise keeps the interest exactly") {
    EnvConfig c;
    c.drift = 0.0;
    c.noise = 0.0;
    Env env(c, 5);
    Rng rng(1);
    const Vector start = env.state().interest;
    for (int t = 0; t < 10; ++t) CHECK(env.step(random_action(c.action_dim, rng)).next_state == start);
}

TEST_CASE("step: saturating gain with aligned action clicks every slot") {
    EnvConfig c;
    c.click_gain = 1e4;
    c.click_bias = 0.0;
    c.state_dim = 4;
    c.action_dim = 4;
    Env env(c, 8);
    // a = W^T interest gives W a a positive cosine with the interest.
    const Matrix& w = env.projection();
    Vector a(4, 0.0);
    for (std::size_t col = 0; col < 4; ++col) {
        for (std::size_t r = 0; r < 4; ++r) a[col] += w(r, col) * env.state().interest[r];
    }
    CHECK(click_probability(c, w, env.state().interest, a) == doctest::Approx(1.0));
    CHECK(env.step(a).reward == 10.0);
}

TEST_CASE("click probability increases with alignment") {
    EnvConfig c;
    const Matrix w = make_projection(c);
    Rng rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        const Vector interest = random_unit(c.state_dim, rng);
        const Vector a1 = random_action(c.action_dim, rng);
        const Vector a2 = random_action(c.action_dim, rng);
        const Vector p1 = numkit::matvec(w, a1), p2 = numkit::matvec(w, a2);
        const double cos1 = numkit::dot(interest, p1) / numkit::norm2(p1);
        const double cos2 = numkit::dot(interest, p2) / numkit::norm2(p2);
        const double q1 = click_probability(c, w, interest, a1), q2 = click_probability(c, w, interest, a2);
        if (cos1 < cos2 - 1e-12) CHECK(q1 < q2);
        if (cos2 < cos1 - 1e-12) CHECK(q2 < q1);
    }
}

TEST_CASE("snapshot: restore replays identical outcomes") {
    EnvConfig c;
    Env env(c, 11);
    Rng rng(4);
    env.step(random_action(c.action_dim, rng));
    const auto snap = env.snapshot();
    const Vector a = random_action(c.action_dim, rng);
    const auto first = env.step(a);
    env.restore(snap);
    CHECK(env.snapshot() == snap);
    CHECK(env.step(a) == first);

    env.restore(snap);
    const auto again = env.snapshot();
    CHECK(again == snap);
}

TEST_CASE("snapshot: rollouts from one snapshot consume identical noise prefixes") {
    EnvConfig c;
    Env env(c, 13);
    Rng rng(6);
    const auto snap = env.snapshot();
    std::vector<std::pair<std::uint64_t, std::uint64_t>> draws[2];
    for (int branch = 0; branch < 2; ++branch) {
        env.restore(snap);
        for (int t = 0; t < 5; ++t) {
            env.step(random_action(c.action_dim, rng));
            draws[branch].emplace_back(env.click_draws(), env.drift_draws());
        }
    }
    CHECK(draws[0] == draws[1]);
    for (int t = 0; t < 5; ++t) {
        CHECK(draws[0][t].first - snap.click_rng.draws == 10u * (t + 1));
        CHECK(draws[0][t].second - snap.drift_rng.draws == 32u * (t + 1));
    }
}

TEST_CASE("snapshot: cross-config restore is rejected; binary round trip") {
    EnvConfig c;
    Env env(c, 1);
    const auto snap = env.snapshot();
    EnvConfig other;
    other.noise = 0.1;
    Env env2(other, 1);
    CHECK_THROWS_AS(env2.restore(snap), ConfigError);

    const auto bytes = serialize_snapshot(snap);
    CHECK(deserialize_snapshot(bytes) == snap);
    auto bad = bytes;
    bad[1] = 'Z';
    CHECK_THROWS_AS(deserialize_snapshot(bad), ArtifactError);
    bad = bytes;
    bad.push_back(0);
    CHECK_THROWS_AS(deserialize_snapshot(bad), ArtifactError);
}

TEST_CASE("slot count does not change the drift noise consumed") {
    EnvConfig c5, c10;
    c5.slots = 5;
    Env e5(c5, 21), e10(c10, 21);
    const Vector a = fixed_action(8);
    for (int t = 0; t < 5; ++t) {
        e5.step(a);
        e10.step(a);
        CHECK(e5.drift_draws() == e10.drift_draws());
        CHECK(e5.snapshot().drift_rng == e10.snapshot().drift_rng);
    }
}

TEST_CASE("intervene: factual action reproduces the factual outcome bitwise") {
    EnvConfig c;
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        Env env(c, rng.next_u64());
        const std::size_t warm = rng.below(c.episode_len);
        for (std::size_t t = 0; t < warm; ++t) env.step(random_action(c.action_dim, rng));
        const auto snap = env.snapshot();
        const Vector a = random_action(c.action_dim, rng);
        const auto factual = env.step(a);
        const auto after = env.snapshot();
        CHECK(env.intervene(snap, a) == factual);
        CHECK(env.snapshot() == after);
    }
}

TEST_CASE("intervene: no causal path from action to state without drift and noise") {
    EnvConfig c;
    c.drift = 0.0;
    c.noise = 0.0;
    Env env(c, 2);
    Rng rng(3);
    const auto snap = env.snapshot();
    const auto factual = env.step(random_action(c.action_dim, rng));
    for (int k = 0; k < 20; ++k) CHECK(env.intervene(snap, random_action(c.action_dim, rng)).next_state == factual.next_state);
}

TEST_CASE("intervene: difference follows the closed-form law when noise is off") {
    EnvConfig c;
    c.noise = 0.0;
    Env env(c, 77);
    const Matrix& w = env.projection();
    const auto snap = env.snapshot();
    const Vector s = env.state().interest;
    Rng rng(8);
    int checked = 0;
    for (int k = 0; k < 50; ++k) {
        const Vector a = random_action(c.action_dim, rng);
        const Vector ac = random_action(c.action_dim, rng);
        const auto f = env.intervene(snap, a);
        const auto cf = env.intervene(snap, ac);
        // Closed form: next = normalize((1 - b r/K) s + (b r/K) W a).
        for (const auto* pair : {&f, &cf}) {
            const Vector& act = pair == &f ? a : ac;
            const double pull = c.drift * pair->ctr;
            const Vector wa = numkit::matvec(w, act);
            Vector expect(c.state_dim);
            for (std::size_t i = 0; i < expect.size(); ++i) expect[i] = (1 - pull) * s[i] + pull * wa[i];
            const double nn = numkit::norm2(expect);
            for (std::size_t i = 0; i < expect.size(); ++i) CHECK(pair->next_state[i] == doctest::Approx(expect[i] / nn).epsilon(1e-12));
        }
        // With equal click counts the unnormalized difference is exactly pull * W (ac - a).
        if (f.reward == cf.reward && f.reward > 0) {
            const double pull = c.drift * f.ctr;
            Vector da(c.action_dim);
            for (std::size_t i = 0; i < da.size(); ++i) da[i] = ac[i] - a[i];
            const Vector wd = numkit::matvec(w, da);
            Vector u(c.state_dim), v(c.state_dim);
            const Vector wa = numkit::matvec(w, a), wac = numkit::matvec(w, ac);
            for (std::size_t i = 0; i < u.size(); ++i) {
                u[i] = (1 - pull) * s[i] + pull * wa[i];
                v[i] = (1 - pull) * s[i] + pull * wac[i];
            }
            for (std::size_t i = 0; i < u.size(); ++i) CHECK(v[i] - u[i] == doctest::Approx(pull * wd[i]).epsilon(1e-9));
            const double nu = numkit::norm2(u), nv = numkit::norm2(v);
            for (std::size_t i = 0; i < u.size(); ++i) {
                CHECK(cf.next_state[i] * nv - f.next_state[i] * nu == doctest::Approx(pull * wd[i]).epsilon(1e-9));
            }
            ++checked;
        }
    }
    CHECK(checked > 0);
}

TEST_CASE("allow_scratch_step rewinds only a finished env") {
    EnvConfig c;
    c.episode_len = 2;
    Env env(c, 1);
    allow_scratch_step(env);
    CHECK(env.state().step == 0);
    env.step(Vector(8, 0.1));
    env.step(Vector(8, 0.1));
    CHECK(env.done());
    const auto before = env.snapshot();
    allow_scratch_step(env);
    CHECK(env.state().step == 1);
    CHECK(env.state().interest == before.state.interest);
    CHECK(env.snapshot().click_rng == before.click_rng);
}
