#include <fstream>
#include <string>

#include "cfrl/agents/agent.hpp"
#include "cfrl/errors.hpp"
#include "cfrl/numkit/serialize.hpp"

namespace cfrl::agents {
namespace {

constexpr int kManifestVersion = 1;

std::string critic_file(std::size_t i, bool target) {
    return "critic" + std::to_string(i) + (target ? "_target.bin" : ".bin");
}

}  // namespace

void save_agent(const Agent& agent, const std::filesystem::path& dir, const nlohmann::json& extra) {
    std::filesystem::create_directories(dir);
    numkit::save_mlp(agent.actor, dir / "actor.bin");
    if (agent.kind != AgentKind::sac) numkit::save_mlp(agent.actor_target, dir / "actor_target.bin");
    for (std::size_t i = 0; i < agent.critics.size(); ++i) {
        numkit::save_mlp(agent.critics[i].net, dir / critic_file(i, false));
        numkit::save_mlp(agent.critics[i].target, dir / critic_file(i, true));
    }
    nlohmann::json manifest = extra;
    manifest["format"] = "cfrl-agent";
    manifest["version"] = kManifestVersion;
    manifest["kind"] = std::string(kind_name(agent.kind));
    manifest["state_dim"] = agent.state_dim;
    manifest["action_dim"] = agent.action_dim;
    manifest["updates"] = agent.updates;
    manifest["critics"] = agent.critics.size();
    manifest["config"] = to_json(agent.config);
    std::ofstream f(dir / "manifest.json", std::ios::trunc);
    if (!f) throw ArtifactError("cannot write " + (dir / "manifest.json").string());
    f << manifest.dump(2) << '\n';
}

LoadedAgent load_agent(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    if (!std::filesystem::exists(manifest_path)) {
        throw ArtifactError("missing checkpoint manifest " + manifest_path.string());
    }
    LoadedAgent out;
    try {
        std::ifstream f(manifest_path);
        out.manifest = nlohmann::json::parse(f);
        if (out.manifest.at("format").get<std::string>() != "cfrl-agent") {
            throw ArtifactError("not an agent checkpoint: " + dir.string());
        }
        if (out.manifest.at("version").get<int>() != kManifestVersion) {
            throw ArtifactError("unsupported agent checkpoint version in " + dir.string());
        }
        auto& a = out.agent;
        a.kind = kind_from_name(out.manifest.at("kind").get<std::string>());
        a.state_dim = out.manifest.at("state_dim").get<std::size_t>();
        a.action_dim = out.manifest.at("action_dim").get<std::size_t>();
        a.updates = out.manifest.at("updates").get<std::uint64_t>();
        a.config = agent_config_from_json(out.manifest.at("config"));
        const auto n_critics = out.manifest.at("critics").get<std::size_t>();
        a.actor = numkit::load_mlp(dir / "actor.bin");
        if (a.kind != AgentKind::sac) a.actor_target = numkit::load_mlp(dir / "actor_target.bin");
        a.actor_opt = AdamState::for_params(a.actor);
        for (std::size_t i = 0; i < n_critics; ++i) {
            Critic c;
            c.net = numkit::load_mlp(dir / critic_file(i, false));
            c.target = numkit::load_mlp(dir / critic_file(i, true));
            c.opt = AdamState::for_params(c.net);
            a.critics.push_back(std::move(c));
        }
        const std::size_t actor_out = a.kind == AgentKind::sac ? 2 * a.action_dim : a.action_dim;
        if (a.actor.in_dim() != a.state_dim || a.actor.out_dim() != actor_out) {
            throw ArtifactError("actor shape disagrees with manifest in " + dir.string());
        }
        for (const auto& c : a.critics) {
            if (c.net.in_dim() != a.state_dim + a.action_dim || c.net.out_dim() != 1) {
                throw ArtifactError("critic shape disagrees with manifest in " + dir.string());
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ArtifactError("corrupt checkpoint manifest " + manifest_path.string() + ": " + e.what());
    } catch (const ConfigError& e) {
        throw ArtifactError("corrupt checkpoint manifest " + manifest_path.string() + ": " + e.what());
    }
    return out;
}

}  // namespace cfrl::agents
