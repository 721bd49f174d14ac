#include <CLI11.hpp>

#include "cfrl/errors.hpp"
#include "cfrl/harness/harness.hpp"
#include "cfrl/kernels/parallel.hpp"

namespace cfrl::harness {
namespace {

void report_error(std::ostream& err, const char* kind, const std::string& message, int code) {
    err << nlohmann::json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << "\n";
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Counterfactual replay augmentation for actor-critic recommenders", "cfrl"};
    app.require_subcommand(1);

    std::string config_path;
    Overrides overrides;
    std::string augment_flag;
    std::uint64_t seed = 0;
    std::string out_dir;

    const std::vector<std::pair<std::string, std::string>> commands{
        {"pretrain", "train the observational DDPG policy"},
        {"train-csp", "train the counterfactual synthesis policy against a pretrained policy"},
        {"train", "train one agent, optionally with counterfactual augmentation"},
        {"eval", "greedy evaluation of a trained agent"},
        {"compare", "baseline vs augmented for every configured agent kind"},
        {"sweep", "CSP training across hidden widths"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "flat JSON config file")->required();
        sub->add_option("--seed", seed, "override seeds with a single seed");
        sub->add_option("--out", out_dir, "override output_dir");
        sub->add_option("--augment", augment_flag, "override augment.enabled")->check(CLI::IsMember({"on", "off"}));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        report_error(err, "usage", e.what(), 2);
        return 2;
    }

    const auto* sub = app.get_subcommands().front();
    if (sub->count("--seed") > 0) overrides.seed = seed;
    if (sub->count("--out") > 0) overrides.out = out_dir;
    if (!augment_flag.empty()) overrides.augment = augment_flag == "on";

    try {
        kernels::apply_thread_limit();
        const RunConfig config = apply_overrides(load_config(config_path), overrides);
        if (auto problems = config.problems(); !problems.empty()) {
            std::string msg = "invalid config:";
            for (const auto& p : problems) msg += "\n  " + p;
            throw ConfigError(msg);
        }
        const std::string name = sub->get_name();
        if (name == "pretrain") cmd_pretrain(config, out);
        else if (name == "train-csp") cmd_train_csp(config, out);
        else if (name == "train") cmd_train(config, out);
        else if (name == "eval") cmd_eval(config, out);
        else if (name == "compare") cmd_compare(config, out);
        else cmd_sweep(config, out);
    } catch (const Error& e) {
        const int code = exit_code_for(e.kind());
        report_error(err, kind_name(e.kind()), e.what(), code);
        return code;
    } catch (const std::exception& e) {
        report_error(err, "internal", e.what(), 1);
        return 1;
    }
    return 0;
}

}  // namespace cfrl::harness
