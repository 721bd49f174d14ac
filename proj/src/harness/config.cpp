#include <fstream>
#include <functional>
#include <sstream>

#include "cfrl/errors.hpp"
#include "cfrl/harness/harness.hpp"

namespace cfrl::harness {
namespace {

using nlohmann::json;

struct Field {
    std::string key;
    std::function<json(const RunConfig&)> get;
    std::function<void(RunConfig&, const json&)> set;
};

template <typename T, typename Owner>
Field member(std::string key, Owner owner) {
    return {key, [owner](const RunConfig& c) { return json(owner(const_cast<RunConfig&>(c))); },
            [owner](RunConfig& c, const json& j) { owner(c) = j.get<T>(); }};
}

void add_agent_fields(std::vector<Field>& fields, const std::string& prefix,
                      std::function<agents::AgentConfig&(RunConfig&)> agent) {
    auto f = [&](const char* name, auto accessor) {
        using T = std::remove_reference_t<decltype(accessor(std::declval<agents::AgentConfig&>()))>;
        fields.push_back(member<T>(prefix + name, [agent, accessor](RunConfig& c) -> T& {
            return accessor(agent(c));
        }));
    };
    f("gamma", [](agents::AgentConfig& a) -> double& { return a.gamma; });
    f("tau", [](agents::AgentConfig& a) -> double& { return a.tau; });
    f("actor_lr", [](agents::AgentConfig& a) -> double& { return a.actor_lr; });
    f("critic_lr", [](agents::AgentConfig& a) -> double& { return a.critic_lr; });
    f("hidden", [](agents::AgentConfig& a) -> std::vector<std::size_t>& { return a.hidden; });
    f("batch_size", [](agents::AgentConfig& a) -> std::size_t& { return a.batch_size; });
    f("buffer_capacity", [](agents::AgentConfig& a) -> std::size_t& { return a.buffer_capacity; });
    f("learning_starts", [](agents::AgentConfig& a) -> std::size_t& { return a.learning_starts; });
    f("explore_noise", [](agents::AgentConfig& a) -> double& { return a.explore_noise; });
    f("policy_delay", [](agents::AgentConfig& a) -> std::size_t& { return a.policy_delay; });
    f("target_noise", [](agents::AgentConfig& a) -> double& { return a.target_noise; });
    f("noise_clip", [](agents::AgentConfig& a) -> double& { return a.noise_clip; });
    f("entropy_alpha", [](agents::AgentConfig& a) -> double& { return a.entropy_alpha; });
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        std::vector<Field> t;
        auto env = [&](const char* name, auto accessor) {
            using T = std::remove_reference_t<decltype(accessor(std::declval<RunConfig&>()))>;
            t.push_back(member<T>(std::string("env.") + name, accessor));
        };
        env("state_dim", [](RunConfig& c) -> std::size_t& { return c.env.state_dim; });
        env("action_dim", [](RunConfig& c) -> std::size_t& { return c.env.action_dim; });
        env("slots", [](RunConfig& c) -> std::size_t& { return c.env.slots; });
        env("drift", [](RunConfig& c) -> double& { return c.env.drift; });
        env("noise", [](RunConfig& c) -> double& { return c.env.noise; });
        env("click_gain", [](RunConfig& c) -> double& { return c.env.click_gain; });
        env("click_bias", [](RunConfig& c) -> double& { return c.env.click_bias; });
        env("episode_len", [](RunConfig& c) -> std::size_t& { return c.env.episode_len; });
        env("projection_seed", [](RunConfig& c) -> std::uint64_t& { return c.env.projection_seed; });

        t.push_back({"agent.kind", [](const RunConfig& c) { return json(std::string(agents::kind_name(c.kind))); },
                     [](RunConfig& c, const json& j) { c.kind = agents::kind_from_name(j.get<std::string>()); }});
        add_agent_fields(t, "agent.", [](RunConfig& c) -> agents::AgentConfig& { return c.agent; });

        t.push_back(member<std::size_t>("pretrain.budget",
                                        [](RunConfig& c) -> std::size_t& { return c.pretrain_budget; }));

        t.push_back(member<std::size_t>("csp.episodes", [](RunConfig& c) -> std::size_t& { return c.csp.episodes; }));
        t.push_back(member<std::size_t>("csp.steps_per_episode",
                                        [](RunConfig& c) -> std::size_t& { return c.csp.steps_per_episode; }));
        t.push_back(member<bool>("csp.greedy_pretrained",
                                 [](RunConfig& c) -> bool& { return c.csp.greedy_pretrained; }));
        t.push_back(member<double>("csp.novelty_bonus", [](RunConfig& c) -> double& { return c.csp.novelty_bonus; }));
        add_agent_fields(t, "csp.agent.", [](RunConfig& c) -> agents::AgentConfig& { return c.csp.agent; });

        t.push_back(member<bool>("augment.enabled", [](RunConfig& c) -> bool& { return c.augment.enabled; }));
        t.push_back(member<std::string>("augment.csp_checkpoint",
                                        [](RunConfig& c) -> std::string& { return c.augment.csp_checkpoint; }));
        t.push_back(member<std::size_t>("augment.frequency",
                                        [](RunConfig& c) -> std::size_t& { return c.augment.frequency; }));
        t.push_back(member<bool>("augment.literal_paper_transition",
                                 [](RunConfig& c) -> bool& { return c.augment.literal_paper_transition; }));

        t.push_back(member<std::vector<std::uint64_t>>("seeds",
                                                       [](RunConfig& c) -> std::vector<std::uint64_t>& { return c.seeds; }));
        t.push_back(member<std::size_t>("budget", [](RunConfig& c) -> std::size_t& { return c.budget; }));
        t.push_back(member<std::size_t>("eval_every", [](RunConfig& c) -> std::size_t& { return c.eval_every; }));
        t.push_back(member<std::size_t>("eval_episodes", [](RunConfig& c) -> std::size_t& { return c.eval_episodes; }));
        t.push_back(member<std::string>("output_dir", [](RunConfig& c) -> std::string& { return c.output_dir; }));
        t.push_back(member<bool>("record_wall_time", [](RunConfig& c) -> bool& { return c.record_wall_time; }));

        t.push_back({"compare.kinds",
                     [](const RunConfig& c) {
                         json arr = json::array();
                         for (auto k : c.compare_kinds) arr.push_back(std::string(agents::kind_name(k)));
                         return arr;
                     },
                     [](RunConfig& c, const json& j) {
                         c.compare_kinds.clear();
                         for (const auto& k : j.get<std::vector<std::string>>()) {
                             c.compare_kinds.push_back(agents::kind_from_name(k));
                         }
                     }});
        t.push_back(member<std::vector<std::size_t>>(
            "compare.budgets", [](RunConfig& c) -> std::vector<std::size_t>& { return c.compare_budgets; }));
        t.push_back(member<std::vector<std::size_t>>(
            "sweep.hidden", [](RunConfig& c) -> std::vector<std::size_t>& { return c.sweep_hidden; }));
        return t;
    }();
    return table;
}

std::string line_col(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

std::vector<std::string> RunConfig::problems() const {
    std::vector<std::string> out = env.problems("env.");
    for (auto& p : agent.problems("agent.")) out.push_back(std::move(p));
    for (auto& p : csp.problems("csp.")) out.push_back(std::move(p));
    for (auto& p : augment.problems("augment.")) out.push_back(std::move(p));
    if (seeds.empty()) out.push_back("seeds must list at least one seed");
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        for (std::size_t j = i + 1; j < seeds.size(); ++j) {
            if (seeds[i] == seeds[j]) out.push_back("seeds must not repeat a seed");
        }
    }
    if (eval_every < 1) out.push_back("eval_every must be >= 1");
    if (eval_episodes < 1) out.push_back("eval_episodes must be >= 1");
    if (output_dir.empty()) out.push_back("output_dir must not be empty");
    if (compare_kinds.empty()) out.push_back("compare.kinds must list at least one agent kind");
    if (!compare_budgets.empty() && compare_budgets.size() != compare_kinds.size()) {
        out.push_back("compare.budgets must be empty or have one entry per compare.kinds entry");
    }
    for (std::size_t i = 0; i < compare_kinds.size(); ++i) {
        for (std::size_t j = i + 1; j < compare_kinds.size(); ++j) {
            if (compare_kinds[i] == compare_kinds[j]) out.push_back("compare.kinds must not repeat a kind");
        }
    }
    if (sweep_hidden.empty()) out.push_back("sweep.hidden must list at least one width");
    for (auto h : sweep_hidden) {
        if (h == 0) out.push_back("sweep.hidden widths must be >= 1");
    }
    return out;
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& f : fields()) keys.push_back(f.key);
    return keys;
}

RunConfig parse_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("config parse error at " + line_col(text, e.byte) + ": " + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config must be a JSON object of key/value pairs");

    RunConfig config;
    std::vector<std::string> errors;
    for (const auto& [key, value] : doc.items()) {
        const auto& table = fields();
        auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.key == key; });
        if (it == table.end()) {
            errors.push_back("unknown key '" + key + "'");
            continue;
        }
        try {
            it->set(config, value);
        } catch (const json::exception& e) {
            errors.push_back("key '" + key + "': wrong type (" + value.type_name() + ")");
        } catch (const ConfigError& e) {
            errors.push_back("key '" + key + "': " + e.what());
        }
    }
    for (auto& p : config.problems()) errors.push_back(std::move(p));
    if (!errors.empty()) {
        std::string msg = "invalid config:";
        for (const auto& e : errors) msg += "\n  " + e;
        throw ConfigError(msg);
    }
    return config;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

json config_to_json(const RunConfig& config) {
    json j = json::object();
    for (const auto& f : fields()) j[f.key] = f.get(config);
    return j;
}

std::string serialize_config(const RunConfig& config) { return config_to_json(config).dump(2) + "\n"; }

RunConfig apply_overrides(RunConfig config, const Overrides& overrides) {
    if (overrides.seed) config.seeds = {*overrides.seed};
    if (overrides.out) config.output_dir = *overrides.out;
    if (overrides.augment) config.augment.enabled = *overrides.augment;
    return config;
}

}  // namespace cfrl::harness
