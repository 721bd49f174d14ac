#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfrl/agents/agent.hpp"
#include "cfrl/augment/augment.hpp"
#include "cfrl/csp/csp.hpp"
#include "cfrl/envsim/env.hpp"

namespace cfrl::harness {

/// Everything a command needs. Loaded from a flat JSON object whose keys are
/// dotted paths ("agent.gamma", "csp.agent.hidden", ...); see config_keys().
struct RunConfig {
    envsim::EnvConfig env;
    agents::AgentKind kind = agents::AgentKind::ddpg;
    agents::AgentConfig agent;
    std::size_t pretrain_budget = 2000;  // episodes of DDPG for the observational policy
    csp::CspTrainerConfig csp;
    augment::AugmentConfig augment;
    std::vector<std::uint64_t> seeds{1};
    std::size_t budget = 2000;  // training episodes per run
    std::size_t eval_every = 50;
    std::size_t eval_episodes = 10;
    std::string output_dir = "runs";
    bool record_wall_time = false;  // write wall_ms into metrics CSVs
    std::vector<agents::AgentKind> compare_kinds{agents::AgentKind::ddpg, agents::AgentKind::td3,
                                                 agents::AgentKind::sac};
    /// Per-kind episode budgets for compare, parallel to compare_kinds; empty
    /// means every kind uses `budget`. Both arms of a kind always share one budget.
    std::vector<std::size_t> compare_budgets;
    std::vector<std::size_t> sweep_hidden{64, 128, 256};

    std::vector<std::string> problems() const;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Every accepted key, in serialization order.
std::vector<std::string> config_keys();

/// Throws ConfigError with line/column for syntax errors, or with one line per
/// unknown key, type error and violated bound.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
/// Flat JSON with every key present.
nlohmann::json config_to_json(const RunConfig& config);
std::string serialize_config(const RunConfig& config);

/// Command-line overrides layered over the config file.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<bool> augment;
};

RunConfig apply_overrides(RunConfig config, const Overrides& overrides);

/// Artifact locations under output_dir.
struct Layout {
    std::filesystem::path root;

    std::filesystem::path pretrain(std::uint64_t seed) const;
    std::filesystem::path csp(std::uint64_t seed) const;
    std::filesystem::path train(agents::AgentKind kind, bool augmented, std::uint64_t seed) const;
    std::filesystem::path compare() const { return root / "compare"; }
    std::filesystem::path sweep() const { return root / "sweep"; }
};

/// The seed single-run commands use: the first configured seed.
std::uint64_t primary_seed(const RunConfig& config);

// Subcommands. Each writes its artifacts under config.output_dir, prints a
// short summary to `out`, and throws cfrl::Error on failure.
void cmd_pretrain(const RunConfig& config, std::ostream& out);
void cmd_train_csp(const RunConfig& config, std::ostream& out);
void cmd_train(const RunConfig& config, std::ostream& out);
kernels::EvalResult cmd_eval(const RunConfig& config, std::ostream& out);

struct RunSummary {
    agents::AgentKind kind = agents::AgentKind::ddpg;
    bool augmented = false;
    std::size_t budget = 0;
    std::uint64_t seed = 0;
    double final_reward = 0.0;
    double final_ctr = 0.0;
    std::uint64_t env_steps = 0;
    std::string curve;  // path relative to the compare directory
};

struct KindAggregate {
    agents::AgentKind kind = agents::AgentKind::ddpg;
    double baseline_reward = 0.0;
    double augmented_reward = 0.0;
    std::optional<double> improvement_pct;
    double baseline_ctr = 0.0;
    double augmented_ctr = 0.0;
    std::optional<double> ctr_improvement_pct;
    std::size_t seeds_augmented_ge_baseline = 0;
    std::size_t seeds = 0;
};

struct ComparisonReport {
    std::vector<RunSummary> runs;
    std::vector<KindAggregate> aggregates;
    std::vector<std::string> failures;
};

/// (augmented - baseline) / baseline * 100; empty when |baseline| < 1e-12.
std::optional<double> improvement_pct(double baseline, double augmented);

/// Recomputes aggregates from runs.
std::vector<KindAggregate> aggregate_runs(const std::vector<RunSummary>& runs,
                                          const std::vector<agents::AgentKind>& kinds);

nlohmann::json report_to_json(const RunConfig& config, const ComparisonReport& report);
/// Baseline / With CSP / Improvement table, one row per agent kind.
std::string format_table(const ComparisonReport& report);

/// Per seed: pretrain, train the CSP, then every kind with and without
/// augmentation at the same episode budget. Failed cells are recorded in
/// report.failures (and compare/failures.json); the rest is still written.
ComparisonReport cmd_compare(const RunConfig& config, std::ostream& out);

struct SweepRow {
    std::size_t hidden = 0;
    std::uint64_t seed = 0;
    double final_mean_abs_dr = 0.0;  // mean over the last 10% of training episodes
    double eval_mean_abs_dr = 0.0;   // greedy CSP evaluation
};

/// Trains one CSP per (hidden width, seed); writes hidden-<v>.csv curves and aggregate.csv.
std::vector<SweepRow> cmd_sweep(const RunConfig& config, std::ostream& out);

/// Budget compare uses for `kind`.
std::size_t compare_budget_for(const RunConfig& config, agents::AgentKind kind);

/// Mean of the first / last max(1, n/10) entries.
double head_mean(const std::vector<double>& values);
double tail_mean(const std::vector<double>& values);

/// Dispatches argv to a subcommand; returns the process exit code. Errors are
/// reported on `err` as one JSON line.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace cfrl::harness
