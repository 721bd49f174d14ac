#include "cfrl/agents/agent.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "cfrl/errors.hpp"

namespace cfrl::agents {
namespace {

using numkit::Activation;
using numkit::MlpTrace;

Vector concat(std::span<const double> a, std::span<const double> b) {
    Vector out;
    out.reserve(a.size() + b.size());
    out.insert(out.end(), a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

std::vector<std::size_t> widths(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
    std::vector<std::size_t> dims{in};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(out);
    return dims;
}

void require_kind(const Agent& agent, AgentKind kind, const char* op) {
    if (agent.kind != kind) {
        throw StateError(std::string(op) + " called on a " + std::string(kind_name(agent.kind)) + " agent");
    }
}

void require_batch(std::span<const Transition> batch) {
    if (batch.empty()) throw StateError("agent update needs a non-empty batch");
}

double q_value(const MlpParams& critic, std::span<const double> s, std::span<const double> a) {
    return numkit::mlp_forward(critic, concat(s, a))[0];
}

void check_loss(double loss, const char* what) {
    if (!std::isfinite(loss)) throw NumericError(std::string("non-finite ") + what + "; update aborted");
}

/// One Adam step of mean squared error toward `targets`. Returns the loss
/// measured before the step.
double regress_critic(Critic& critic, std::span<const Transition> batch, std::span<const double> targets,
                      double lr) {
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    MlpGrads grads = MlpGrads::zeros_like(critic.net);
    MlpTrace trace;
    double loss = 0.0;
    for (std::size_t j = 0; j < batch.size(); ++j) {
        const double q = numkit::mlp_forward(critic.net, concat(batch[j].s, batch[j].a), trace)[0];
        const double diff = q - targets[j];
        loss += diff * diff;
        const double g = 2.0 * diff * inv_b;
        numkit::mlp_backward(critic.net, trace, std::span<const double>(&g, 1), &grads, nullptr);
    }
    loss *= inv_b;
    check_loss(loss, "critic loss");
    numkit::adam_step(critic.net, grads, critic.opt, lr);
    return loss;
}

/// Deterministic policy gradient step: ascend mean Q(s, actor(s)).
double deterministic_actor_step(Agent& agent, std::span<const Transition> batch) {
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    const auto& critic = agent.critics.front().net;
    MlpGrads grads = MlpGrads::zeros_like(agent.actor);
    MlpTrace actor_trace;
    MlpTrace critic_trace;
    Vector critic_in_grad;
    double loss = 0.0;
    const double out_grad = -inv_b;
    for (const auto& t : batch) {
        const auto& a = numkit::mlp_forward(agent.actor, t.s, actor_trace);
        const double q = numkit::mlp_forward(critic, concat(t.s, a), critic_trace)[0];
        loss -= q;
        numkit::mlp_backward(critic, critic_trace, std::span<const double>(&out_grad, 1), nullptr,
                             &critic_in_grad);
        const std::span<const double> da(critic_in_grad.data() + agent.state_dim, agent.action_dim);
        numkit::mlp_backward(agent.actor, actor_trace, da, &grads, nullptr);
    }
    loss *= inv_b;
    check_loss(loss, "actor loss");
    numkit::adam_step(agent.actor, grads, agent.actor_opt, agent.config.actor_lr);
    return loss;
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

}  // namespace

std::string_view kind_name(AgentKind kind) {
    switch (kind) {
    case AgentKind::ddpg: return "ddpg";
    case AgentKind::td3: return "td3";
    case AgentKind::sac: return "sac";
    }
    return "?";
}

AgentKind kind_from_name(std::string_view name) {
    if (name == "ddpg") return AgentKind::ddpg;
    if (name == "td3") return AgentKind::td3;
    if (name == "sac") return AgentKind::sac;
    throw ConfigError("unknown agent kind '" + std::string(name) + "' (expected ddpg, td3 or sac)");
}

std::vector<std::string> AgentConfig::problems(std::string_view prefix) const {
    std::vector<std::string> out;
    const std::string p(prefix);
    auto unit = [&](double v, const char* name) {
        if (!(v >= 0.0 && v <= 1.0)) out.push_back(p + name + " must lie in [0, 1], got " + std::to_string(v));
    };
    auto positive = [&](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) out.push_back(p + name + " must be finite and > 0");
    };
    auto non_negative = [&](double v, const char* name) {
        if (!(v >= 0.0) || !std::isfinite(v)) out.push_back(p + name + " must be finite and >= 0");
    };
    unit(gamma, "gamma");
    unit(tau, "tau");
    positive(actor_lr, "actor_lr");
    positive(critic_lr, "critic_lr");
    if (hidden.empty()) out.push_back(p + "hidden must list at least one layer width");
    for (auto h : hidden) {
        if (h == 0) out.push_back(p + "hidden widths must be >= 1");
    }
    if (batch_size < 1) out.push_back(p + "batch_size must be >= 1");
    if (buffer_capacity < 1) out.push_back(p + "buffer_capacity must be >= 1");
    non_negative(explore_noise, "explore_noise");
    if (policy_delay < 1) out.push_back(p + "policy_delay must be >= 1");
    non_negative(target_noise, "target_noise");
    non_negative(noise_clip, "noise_clip");
    non_negative(entropy_alpha, "entropy_alpha");
    return out;
}

void AgentConfig::validate() const {
    const auto list = problems();
    if (list.empty()) return;
    std::string msg;
    for (const auto& s : list) msg += (msg.empty() ? "" : "; ") + s;
    throw ConfigError(msg);
}

nlohmann::json to_json(const AgentConfig& c) {
    return nlohmann::json{{"gamma", c.gamma},
                          {"tau", c.tau},
                          {"actor_lr", c.actor_lr},
                          {"critic_lr", c.critic_lr},
                          {"hidden", c.hidden},
                          {"batch_size", c.batch_size},
                          {"buffer_capacity", c.buffer_capacity},
                          {"learning_starts", c.learning_starts},
                          {"explore_noise", c.explore_noise},
                          {"policy_delay", c.policy_delay},
                          {"target_noise", c.target_noise},
                          {"noise_clip", c.noise_clip},
                          {"entropy_alpha", c.entropy_alpha}};
}

AgentConfig agent_config_from_json(const nlohmann::json& j) {
    AgentConfig c;
    try {
        c.gamma = j.at("gamma").get<double>();
        c.tau = j.at("tau").get<double>();
        c.actor_lr = j.at("actor_lr").get<double>();
        c.critic_lr = j.at("critic_lr").get<double>();
        c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
        c.batch_size = j.at("batch_size").get<std::size_t>();
        c.buffer_capacity = j.at("buffer_capacity").get<std::size_t>();
        c.learning_starts = j.at("learning_starts").get<std::size_t>();
        c.explore_noise = j.at("explore_noise").get<double>();
        c.policy_delay = j.at("policy_delay").get<std::size_t>();
        c.target_noise = j.at("target_noise").get<double>();
        c.noise_clip = j.at("noise_clip").get<double>();
        c.entropy_alpha = j.at("entropy_alpha").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ArtifactError(std::string("malformed agent config in manifest: ") + e.what());
    }
    return c;
}

Agent make_agent(AgentKind kind, const AgentConfig& config, std::size_t state_dim,
                 std::size_t action_dim, Rng& init_rng) {
    config.validate();
    if (state_dim == 0 || action_dim == 0) throw ConfigError("agent dimensions must be >= 1");
    Agent agent;
    agent.kind = kind;
    agent.config = config;
    agent.state_dim = state_dim;
    agent.action_dim = action_dim;

    const bool sac = kind == AgentKind::sac;
    const auto actor_dims = widths(state_dim, config.hidden, sac ? 2 * action_dim : action_dim);
    agent.actor = numkit::make_mlp(actor_dims, Activation::relu, sac ? Activation::identity : Activation::tanh,
                                   init_rng);
    if (!sac) agent.actor_target = agent.actor;
    agent.actor_opt = AdamState::for_params(agent.actor);

    const std::size_t n_critics = kind == AgentKind::ddpg ? 1 : 2;
    const auto critic_dims = widths(state_dim + action_dim, config.hidden, 1);
    for (std::size_t i = 0; i < n_critics; ++i) {
        Critic c;
        c.net = numkit::make_mlp(critic_dims, Activation::relu, Activation::identity, init_rng);
        c.target = c.net;
        c.opt = AdamState::for_params(c.net);
        agent.critics.push_back(std::move(c));
    }
    return agent;
}

Vector greedy_action(const Agent& agent, std::span<const double> s) {
    numkit::require_dim(s.size(), agent.state_dim, "agent state");
    Vector out = numkit::mlp_forward(agent.actor, s);
    if (agent.kind == AgentKind::sac) {
        out.resize(agent.action_dim);
        for (auto& x : out) x = std::tanh(x);
    }
    return out;
}

Vector select_action(const Agent& agent, std::span<const double> s, bool explore, Rng& rng) {
    if (!explore) return greedy_action(agent, s);
    if (agent.kind == AgentKind::sac) {
        numkit::require_dim(s.size(), agent.state_dim, "agent state");
        return sac_sample(agent.actor, s, rng).action;
    }
    Vector a = greedy_action(agent, s);
    for (auto& x : a) x = std::clamp(x + agent.config.explore_noise * rng.normal(), -1.0, 1.0);
    return a;
}

double ddpg_critic_target(const Agent& agent, const Transition& t) {
    if (t.done) return t.r;
    const Vector a_next = numkit::mlp_forward(agent.actor_target, t.s_next);
    return t.r + agent.config.gamma * q_value(agent.critics.front().target, t.s_next, a_next);
}

UpdateLosses ddpg_update(Agent& agent, std::span<const Transition> batch) {
    require_kind(agent, AgentKind::ddpg, "ddpg_update");
    require_batch(batch);
    std::vector<double> ys(batch.size());
    for (std::size_t j = 0; j < batch.size(); ++j) ys[j] = ddpg_critic_target(agent, batch[j]);

    UpdateLosses losses;
    losses.critic_loss = regress_critic(agent.critics.front(), batch, ys, agent.config.critic_lr);
    losses.actor_loss = deterministic_actor_step(agent, batch);
    losses.actor_updated = true;
    numkit::soft_update(agent.critics.front().target, agent.critics.front().net, agent.config.tau);
    numkit::soft_update(agent.actor_target, agent.actor, agent.config.tau);
    return losses;
}

Vector td3_target_action(const Agent& agent, std::span<const double> s_next, Rng& rng) {
    Vector a = numkit::mlp_forward(agent.actor_target, s_next);
    const double clip = agent.config.noise_clip;
    for (auto& x : a) {
        const double eps = std::clamp(agent.config.target_noise * rng.normal(), -clip, clip);
        x = std::clamp(x + eps, -1.0, 1.0);
    }
    return a;
}

double td3_critic_target(const Agent& agent, const Transition& t, Rng& rng) {
    if (t.done) return t.r;
    const Vector a_next = td3_target_action(agent, t.s_next, rng);
    const double q1 = q_value(agent.critics[0].target, t.s_next, a_next);
    const double q2 = q_value(agent.critics[1].target, t.s_next, a_next);
    return t.r + agent.config.gamma * std::min(q1, q2);
}

UpdateLosses td3_update(Agent& agent, std::span<const Transition> batch, std::uint64_t update_index,
                        Rng& rng) {
    require_kind(agent, AgentKind::td3, "td3_update");
    require_batch(batch);
    std::vector<double> ys(batch.size());
    for (std::size_t j = 0; j < batch.size(); ++j) ys[j] = td3_critic_target(agent, batch[j], rng);

    UpdateLosses losses;
    for (auto& c : agent.critics) losses.critic_loss += regress_critic(c, batch, ys, agent.config.critic_lr);
    losses.critic_loss /= static_cast<double>(agent.critics.size());

    if (update_index % agent.config.policy_delay == 0) {
        losses.actor_loss = deterministic_actor_step(agent, batch);
        losses.actor_updated = true;
        for (auto& c : agent.critics) numkit::soft_update(c.target, c.net, agent.config.tau);
        numkit::soft_update(agent.actor_target, agent.actor, agent.config.tau);
    }
    return losses;
}

double squashed_gaussian_log_prob(std::span<const double> pre_tanh, std::span<const double> mean,
                                  std::span<const double> log_std) {
    double lp = 0.0;
    for (std::size_t i = 0; i < pre_tanh.size(); ++i) {
        const double u = pre_tanh[i];
        const double z = (u - mean[i]) * std::exp(-log_std[i]);
        // log(1 - tanh(u)^2) = 2 * (log 2 - u - softplus(-2u))
        const double log_jac = 2.0 * (std::numbers::ln2 - u - softplus(-2.0 * u));
        lp += -0.5 * z * z - log_std[i] - kHalfLog2Pi - log_jac;
    }
    return lp;
}

SacSample sac_sample_with_noise(const MlpParams& actor, std::span<const double> s,
                                std::span<const double> noise) {
    const Vector out = numkit::mlp_forward(actor, s);
    const std::size_t m = out.size() / 2;
    numkit::require_dim(noise.size(), m, "sac noise");
    SacSample smp;
    smp.mean.assign(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(m));
    smp.log_std.resize(m);
    smp.pre_tanh.resize(m);
    smp.action.resize(m);
    smp.noise.assign(noise.begin(), noise.end());
    for (std::size_t i = 0; i < m; ++i) {
        smp.log_std[i] = std::clamp(out[m + i], kSacLogStdMin, kSacLogStdMax);
        smp.pre_tanh[i] = smp.mean[i] + std::exp(smp.log_std[i]) * noise[i];
        smp.action[i] = std::tanh(smp.pre_tanh[i]);
    }
    smp.log_prob = squashed_gaussian_log_prob(smp.pre_tanh, smp.mean, smp.log_std);
    return smp;
}

SacSample sac_sample(const MlpParams& actor, std::span<const double> s, Rng& rng) {
    Vector noise(actor.out_dim() / 2);
    for (auto& x : noise) x = rng.normal();
    return sac_sample_with_noise(actor, s, noise);
}

double sac_critic_target(const Agent& agent, const Transition& t, Rng& rng) {
    if (t.done) return t.r;
    const SacSample next = sac_sample(agent.actor, t.s_next, rng);
    const double q1 = q_value(agent.critics[0].target, t.s_next, next.action);
    const double q2 = q_value(agent.critics[1].target, t.s_next, next.action);
    return t.r + agent.config.gamma * (std::min(q1, q2) - agent.config.entropy_alpha * next.log_prob);
}

SacActorObjective sac_actor_objective(const Agent& agent, std::span<const Transition> batch,
                                      std::span<const Vector> noise) {
    require_kind(agent, AgentKind::sac, "sac_actor_objective");
    require_batch(batch);
    numkit::require_dim(noise.size(), batch.size(), "sac noise batch");
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    const double alpha = agent.config.entropy_alpha;
    const std::size_t m = agent.action_dim;

    SacActorObjective obj{0.0, MlpGrads::zeros_like(agent.actor)};
    MlpTrace actor_trace;
    MlpTrace critic_trace[2];
    Vector critic_in_grad;
    Vector out_grad(2 * m);
    for (std::size_t j = 0; j < batch.size(); ++j) {
        const auto& t = batch[j];
        numkit::require_dim(noise[j].size(), m, "sac noise");
        const auto& out = numkit::mlp_forward(agent.actor, t.s, actor_trace);
        Vector action(m);
        Vector pre(m);
        Vector mean(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(m));
        Vector log_std(m);
        for (std::size_t i = 0; i < m; ++i) {
            log_std[i] = std::clamp(out[m + i], kSacLogStdMin, kSacLogStdMax);
            pre[i] = mean[i] + std::exp(log_std[i]) * noise[j][i];
            action[i] = std::tanh(pre[i]);
        }
        const double log_prob = squashed_gaussian_log_prob(pre, mean, log_std);
        const Vector critic_in = concat(t.s, action);
        double q[2];
        for (std::size_t c = 0; c < 2; ++c) {
            q[c] = numkit::mlp_forward(agent.critics[c].net, critic_in, critic_trace[c])[0];
        }
        const std::size_t k = q[1] < q[0] ? 1 : 0;
        obj.loss += (alpha * log_prob - q[k]) * inv_b;

        const double one = 1.0;
        numkit::mlp_backward(agent.critics[k].net, critic_trace[k], std::span<const double>(&one, 1), nullptr,
                             &critic_in_grad);
        for (std::size_t i = 0; i < m; ++i) {
            const double g = critic_in_grad[agent.state_dim + i];  // dQ/da_i
            const double a = action[i];
            const double slope = 1.0 - a * a;
            const double sigma_xi = std::exp(log_std[i]) * noise[j][i];
            out_grad[i] = (alpha * 2.0 * a - g * slope) * inv_b;
            const bool clamped = out[m + i] < kSacLogStdMin || out[m + i] > kSacLogStdMax;
            out_grad[m + i] =
                clamped ? 0.0 : (alpha * (-1.0 + 2.0 * a * sigma_xi) - g * slope * sigma_xi) * inv_b;
        }
        numkit::mlp_backward(agent.actor, actor_trace, out_grad, &obj.grads, nullptr);
    }
    return obj;
}

UpdateLosses sac_update(Agent& agent, std::span<const Transition> batch, Rng& rng) {
    require_kind(agent, AgentKind::sac, "sac_update");
    require_batch(batch);
    std::vector<double> ys(batch.size());
    for (std::size_t j = 0; j < batch.size(); ++j) ys[j] = sac_critic_target(agent, batch[j], rng);

    UpdateLosses losses;
    for (auto& c : agent.critics) losses.critic_loss += regress_critic(c, batch, ys, agent.config.critic_lr);
    losses.critic_loss /= static_cast<double>(agent.critics.size());

    std::vector<Vector> noise(batch.size(), Vector(agent.action_dim));
    for (auto& v : noise) {
        for (auto& x : v) x = rng.normal();
    }
    auto obj = sac_actor_objective(agent, batch, noise);
    check_loss(obj.loss, "actor loss");
    numkit::adam_step(agent.actor, obj.grads, agent.actor_opt, agent.config.actor_lr);
    losses.actor_loss = obj.loss;
    losses.actor_updated = true;
    for (auto& c : agent.critics) numkit::soft_update(c.target, c.net, agent.config.tau);
    return losses;
}

UpdateLosses agent_update(Agent& agent, std::span<const Transition> batch, Rng& rng) {
    UpdateLosses losses;
    switch (agent.kind) {
    case AgentKind::ddpg: losses = ddpg_update(agent, batch); break;
    case AgentKind::td3: losses = td3_update(agent, batch, agent.updates, rng); break;
    case AgentKind::sac: losses = sac_update(agent, batch, rng); break;
    }
    ++agent.updates;
    return losses;
}

}  // namespace cfrl::agents
