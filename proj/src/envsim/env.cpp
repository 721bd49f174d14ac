#include "cfrl/envsim/env.hpp"

#include <cmath>
#include <string>

#include "cfrl/errors.hpp"
#include "cfrl/numkit/serialize.hpp"

namespace cfrl::envsim {
namespace {

constexpr char kSnapshotMagic[4] = {'C', 'F', 'E', 'S'};
constexpr std::uint32_t kSnapshotVersion = 1;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Vector unit_normal_vector(std::size_t n, Rng& rng) {
    Vector v(n);
    double sq = 0.0;
    do {
        sq = 0.0;
        for (auto& x : v) {
            x = rng.normal();
            sq += x * x;
        }
    } while (sq == 0.0);
    const double inv = 1.0 / std::sqrt(sq);
    for (auto& x : v) x *= inv;
    return v;
}

}  // namespace

std::vector<std::string> EnvConfig::problems(std::string_view prefix) const {
    std::vector<std::string> out;
    const std::string p(prefix);
    if (state_dim < 1) out.push_back(p + "state_dim must be >= 1");
    if (action_dim < 1) out.push_back(p + "action_dim must be >= 1");
    if (slots < 1) out.push_back(p + "slots must be >= 1");
    if (!(drift >= 0.0 && drift <= 1.0)) out.push_back(p + "drift must lie in [0, 1]");
    if (!(noise >= 0.0) || !std::isfinite(noise)) out.push_back(p + "noise must be finite and >= 0");
    if (!std::isfinite(click_gain)) out.push_back(p + "click_gain must be finite");
    if (!std::isfinite(click_bias)) out.push_back(p + "click_bias must be finite");
    if (episode_len < 1) out.push_back(p + "episode_len must be >= 1");
    return out;
}

void EnvConfig::validate() const {
    const auto list = problems();
    if (list.empty()) return;
    std::string msg;
    for (const auto& s : list) msg += (msg.empty() ? "" : "; ") + s;
    throw ConfigError(msg);
}

std::uint64_t EnvConfig::fingerprint() const {
    std::vector<std::uint8_t> b;
    numkit::put_u64(b, state_dim);
    numkit::put_u64(b, action_dim);
    numkit::put_u64(b, slots);
    numkit::put_f64(b, drift);
    numkit::put_f64(b, noise);
    numkit::put_f64(b, click_gain);
    numkit::put_f64(b, click_bias);
    numkit::put_u64(b, episode_len);
    numkit::put_u64(b, projection_seed);
    return numkit::fnv1a(std::string_view(reinterpret_cast<const char*>(b.data()), b.size()));
}

Matrix make_projection(const EnvConfig& config) {
    Rng rng = Rng(config.projection_seed).fork("projection");
    Matrix w(config.state_dim, config.action_dim);
    for (std::size_t c = 0; c < config.action_dim; ++c) {
        const Vector col = unit_normal_vector(config.state_dim, rng);
        for (std::size_t r = 0; r < config.state_dim; ++r) w(r, c) = col[r];
    }
    return w;
}

double click_probability(const EnvConfig& config, const Matrix& projection,
                         std::span<const double> interest, std::span<const double> action) {
    const Vector proj = numkit::matvec(projection, action);
    const double pn = numkit::norm2(proj);
    // interest is unit norm by invariant
    const double cosine = pn > 0.0 ? numkit::dot(interest, proj) / pn : 0.0;
    return sigmoid(config.click_gain * cosine + config.click_bias);
}

StepOutcome transition(const EnvConfig& config, const Matrix& projection, const EnvState& state,
                       std::span<const double> action, const ExogenousNoise& noise) {
    numkit::require_dim(action.size(), config.action_dim, "env action");
    numkit::require_finite(action, "env action");
    numkit::require_dim(noise.click_uniforms.size(), config.slots, "click noise");
    numkit::require_dim(noise.drift_normals.size(), config.state_dim, "drift noise");

    const Vector proj = numkit::matvec(projection, action);
    const double p_click = click_probability(config, projection, state.interest, action);

    std::size_t clicks = 0;
    for (double u : noise.click_uniforms) clicks += u < p_click ? 1 : 0;

    StepOutcome out;
    out.reward = static_cast<double>(clicks);
    out.ctr = out.reward / static_cast<double>(config.slots);

    const double pull = config.drift * out.ctr;
    if (pull == 0.0 && config.noise == 0.0) {
        out.next_state = state.interest;
    } else {
        Vector next(config.state_dim);
        for (std::size_t i = 0; i < next.size(); ++i) {
            next[i] = (1.0 - pull) * state.interest[i] + pull * proj[i] +
                      config.noise * noise.drift_normals[i];
        }
        const double nn = numkit::norm2(next);
        if (nn > 0.0) {
            for (auto& x : next) x /= nn;
            out.next_state = std::move(next);
        } else {
            out.next_state = state.interest;
        }
    }
    out.done = state.step + 1 >= config.episode_len;
    return out;
}

Env::Env(const EnvConfig& config, std::uint64_t seed)
    : config_(config),
      projection_((config.validate(), make_projection(config))),
      fingerprint_(config.fingerprint()) {
    const Rng master(seed);
    Rng init = master.fork("init");
    state_.interest = unit_normal_vector(config_.state_dim, init);
    state_.step = 0;
    click_rng_ = master.fork("click");
    drift_rng_ = master.fork("drift");
}

StepOutcome Env::step(std::span<const double> action) {
    if (done()) throw StateError("env step past episode end");
    numkit::require_dim(action.size(), config_.action_dim, "env action");
    numkit::require_finite(action, "env action");

    ExogenousNoise noise;
    noise.click_uniforms.resize(config_.slots);
    for (auto& u : noise.click_uniforms) u = click_rng_.uniform();
    noise.drift_normals.resize(config_.state_dim);
    for (auto& e : noise.drift_normals) e = drift_rng_.normal();

    StepOutcome out = transition(config_, projection_, state_, action, noise);
    state_.interest = out.next_state;
    state_.step += 1;
    return out;
}

EnvSnapshot Env::snapshot() const {
    return EnvSnapshot{state_, click_rng_.state(), drift_rng_.state(), fingerprint_};
}

void Env::restore(const EnvSnapshot& snap) {
    if (snap.config_fingerprint != fingerprint_) {
        throw ConfigError("snapshot was taken under a different env config");
    }
    numkit::require_dim(snap.state.interest.size(), config_.state_dim, "snapshot interest");
    if (snap.state.step > config_.episode_len) throw ConfigError("snapshot step beyond episode length");
    state_ = snap.state;
    click_rng_ = Rng(snap.click_rng);
    drift_rng_ = Rng(snap.drift_rng);
}

StepOutcome Env::intervene(const EnvSnapshot& snap, std::span<const double> action) {
    restore(snap);
    return step(action);
}

std::vector<std::uint8_t> serialize_snapshot(const EnvSnapshot& snap) {
    std::vector<std::uint8_t> out(std::begin(kSnapshotMagic), std::end(kSnapshotMagic));
    numkit::put_u32(out, kSnapshotVersion);
    numkit::put_u64(out, snap.config_fingerprint);
    numkit::put_u64(out, snap.state.step);
    numkit::put_u32(out, static_cast<std::uint32_t>(snap.state.interest.size()));
    for (double x : snap.state.interest) numkit::put_f64(out, x);
    for (const auto* rng : {&snap.click_rng, &snap.drift_rng}) {
        for (auto w : rng->words) numkit::put_u64(out, w);
        numkit::put_u64(out, rng->draws);
    }
    return out;
}

EnvSnapshot deserialize_snapshot(std::span<const std::uint8_t> bytes) {
    numkit::ByteReader in(bytes);
    for (char c : kSnapshotMagic) {
        if (in.u8() != static_cast<std::uint8_t>(c)) throw ArtifactError("not an env snapshot (bad magic)");
    }
    if (in.u32() != kSnapshotVersion) throw ArtifactError("unsupported env snapshot version");
    EnvSnapshot snap;
    snap.config_fingerprint = in.u64();
    snap.state.step = in.u64();
    snap.state.interest.resize(in.u32());
    for (auto& x : snap.state.interest) x = in.f64();
    for (auto* rng : {&snap.click_rng, &snap.drift_rng}) {
        for (auto& w : rng->words) w = in.u64();
        rng->draws = in.u64();
    }
    if (!in.done()) throw ArtifactError("trailing bytes after env snapshot");
    return snap;
}

void allow_scratch_step(Env& env) {
    if (!env.done()) return;
    EnvSnapshot snap = env.snapshot();
    snap.state.step -= 1;
    env.restore(snap);
}

Vector random_action(std::size_t action_dim, Rng& rng) {
    Vector a(action_dim);
    for (auto& x : a) x = rng.uniform(-1.0, 1.0);
    return a;
}

}  // namespace cfrl::envsim
