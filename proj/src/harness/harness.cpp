#include "cfrl/harness/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>

#include "cfrl/errors.hpp"
#include "cfrl/kernels/parallel.hpp"

namespace cfrl::harness {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string seed_dir(std::uint64_t seed) { return "seed-" + std::to_string(seed); }

const char* arm_name(bool augmented) { return augmented ? "augmented" : "baseline"; }

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ArtifactError("cannot write " + path.string());
    f << text;
}

json env_json(const RunConfig& config) {
    json out = json::object();
    const json all = config_to_json(config);
    for (const auto& [key, value] : all.items()) {
        if (key.rfind("env.", 0) == 0) out[key] = value;
    }
    return out;
}

json env_extra(const RunConfig& config) {
    return {{"env", env_json(config)}, {"env_fingerprint", csp::hash_hex(config.env.fingerprint())}};
}

json read_manifest(const fs::path& dir) {
    const auto path = dir / "manifest.json";
    std::ifstream f(path);
    if (!f) throw ArtifactError("missing checkpoint manifest " + path.string());
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        throw ArtifactError("corrupt checkpoint manifest " + path.string() + ": " + e.what());
    }
}

void require_artifact(const fs::path& dir, const std::string& what) {
    if (!fs::exists(dir / "manifest.json")) {
        throw ArtifactError("missing " + what + " checkpoint: " + dir.string());
    }
}

void require_same_env(const RunConfig& config, const fs::path& dir) {
    const json manifest = read_manifest(dir);
    const std::string expected = csp::hash_hex(config.env.fingerprint());
    const std::string found = manifest.value("env_fingerprint", "");
    if (found != expected) {
        throw ConfigError("checkpoint " + dir.string() + " was trained under a different env config (fingerprint " +
                          found + ", current " + expected + ")");
    }
}

void require_same_agent(const agents::AgentConfig& expected, agents::AgentKind kind, const fs::path& dir) {
    const json manifest = read_manifest(dir);
    if (manifest.value("kind", "") != agents::kind_name(kind)) {
        throw ConfigError("checkpoint " + dir.string() + " holds a " + manifest.value("kind", "?") +
                          " agent, config asks for " + std::string(agents::kind_name(kind)));
    }
    if (!manifest.contains("config") || manifest.at("config") != agents::to_json(expected)) {
        throw ConfigError("checkpoint " + dir.string() + " was trained with different agent hyperparameters");
    }
}

std::string timestamp_utc() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Non-deterministic facts about a run live only here.
void write_run_manifest(const fs::path& dir, const std::string& command, const RunConfig& config,
                        std::uint64_t seed, Clock::time_point started, const std::vector<agents::MetricsRow>& rows) {
    json wall = json::array();
    for (const auto& r : rows) wall.push_back({{"episode", r.episode}, {"wall_ms", r.wall_ms}});
    const json manifest = {
        {"command", command},
        {"seed", seed},
        {"finished_at", timestamp_utc()},
        {"wall_ms", std::chrono::duration<double, std::milli>(Clock::now() - started).count()},
        {"eval_wall_ms", wall},
        {"threads", kernels::configured_threads()},
        {"config", config_to_json(config)},
    };
    write_text(dir / "run_manifest.json", manifest.dump(2) + "\n");
}

std::vector<agents::MetricsRow> csv_rows(const RunConfig& config, std::vector<agents::MetricsRow> rows) {
    if (!config.record_wall_time) {
        for (auto& r : rows) r.wall_ms = 0.0;
    }
    return rows;
}

agents::TrainOptions train_options(const RunConfig& config, std::size_t episodes) {
    agents::TrainOptions options;
    options.episodes = episodes;
    options.eval_every = config.eval_every;
    options.eval_episodes = config.eval_episodes;
    return options;
}

std::string fmt(double v, const char* format = "%.6f") {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

std::string fmt_pct(const std::optional<double>& v) { return v ? fmt(*v, "%.2f") + "%" : "n/a"; }

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Evaluation row for a run that took no training episodes.
agents::MetricsRow initial_row(const RunConfig& config, const agents::Agent& agent, std::uint64_t seed) {
    const auto eval = agents::evaluate_agent(agent, config.env, config.eval_episodes, agents::eval_seed_for(seed));
    agents::MetricsRow row;
    row.eval_avg_reward = eval.avg_reward;
    row.eval_ctr = eval.ctr;
    return row;
}

struct SeedArtifacts {
    csp::PretrainedPolicy pi_o;
    csp::CspPolicy csp;
};

}  // namespace

fs::path Layout::pretrain(std::uint64_t seed) const { return root / "pretrain" / seed_dir(seed); }

fs::path Layout::csp(std::uint64_t seed) const { return root / "csp" / seed_dir(seed); }

fs::path Layout::train(agents::AgentKind kind, bool augmented, std::uint64_t seed) const {
    return root / "train" / (std::string(agents::kind_name(kind)) + "-" + arm_name(augmented)) / seed_dir(seed);
}

std::uint64_t primary_seed(const RunConfig& config) {
    if (config.seeds.empty()) throw ConfigError("seeds must list at least one seed");
    return config.seeds.front();
}

std::size_t compare_budget_for(const RunConfig& config, agents::AgentKind kind) {
    if (config.compare_budgets.empty()) return config.budget;
    for (std::size_t i = 0; i < config.compare_kinds.size(); ++i) {
        if (config.compare_kinds[i] == kind) return config.compare_budgets.at(i);
    }
    return config.budget;
}

double head_mean(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    const std::size_t n = std::max<std::size_t>(1, values.size() / 10);
    return mean_of({values.begin(), values.begin() + static_cast<std::ptrdiff_t>(n)});
}

double tail_mean(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    const std::size_t n = std::max<std::size_t>(1, values.size() / 10);
    return mean_of({values.end() - static_cast<std::ptrdiff_t>(n), values.end()});
}

void cmd_pretrain(const RunConfig& config, std::ostream& out) {
    const auto started = Clock::now();
    const std::uint64_t seed = primary_seed(config);
    const Layout layout{config.output_dir};
    const auto result =
        csp::pretrain_policy(config.env, config.agent, config.pretrain_budget, seed, config.eval_episodes);
    const fs::path dir = layout.pretrain(seed);
    csp::save_pretrained(result, dir, env_extra(config));
    write_text(dir / "metrics.csv", agents::metrics_csv("pretrain-" + seed_dir(seed), csv_rows(config, result.metrics)));
    write_run_manifest(dir, "pretrain", config, seed, started, result.metrics);
    out << "pretrain seed=" << seed << " episodes=" << config.pretrain_budget
        << " avg_reward=" << fmt(result.eval_avg_reward) << " ctr=" << fmt(result.eval_ctr) << " -> "
        << dir.string() << "\n";
}

void cmd_train_csp(const RunConfig& config, std::ostream& out) {
    const auto started = Clock::now();
    const std::uint64_t seed = primary_seed(config);
    const Layout layout{config.output_dir};
    const fs::path pre_dir = layout.pretrain(seed);
    require_artifact(pre_dir, "pretrained policy");
    require_same_env(config, pre_dir);
    const auto pi_o = csp::load_pretrained(pre_dir);
    auto result = csp::train_csp(config.env, pi_o, config.csp, seed);

    const fs::path dir = layout.csp(seed);
    csp::save_csp(result.csp, dir, env_extra(config));
    write_text(dir / "csp_log.csv", csp::csp_log_csv(result.log));
    write_run_manifest(dir, "train-csp", config, seed, started, {});

    std::vector<double> curve;
    for (const auto& row : result.log) curve.push_back(row.mean_abs_dr);
    out << "train-csp seed=" << seed << " episodes=" << config.csp.episodes
        << " first_mean_abs_dr=" << fmt(head_mean(curve)) << " final_mean_abs_dr=" << fmt(tail_mean(curve))
        << " -> " << dir.string() << "\n";
}

void cmd_train(const RunConfig& config, std::ostream& out) {
    const auto started = Clock::now();
    const std::uint64_t seed = primary_seed(config);
    const Layout layout{config.output_dir};

    std::optional<csp::CspPolicy> csp_policy;
    augment::AugmentConfig aug = config.augment;
    if (aug.enabled) {
        const fs::path csp_dir = aug.csp_checkpoint.empty() ? layout.csp(seed) : fs::path(aug.csp_checkpoint);
        require_artifact(csp_dir, "CSP");
        require_same_env(config, csp_dir);
        csp_policy = csp::load_csp(csp_dir);
        aug.csp_checkpoint = csp_dir.string();
    }
    auto result = augment::train_with_augmentation(config.kind, config.env, config.agent, aug,
                                                   train_options(config, config.budget), seed,
                                                   csp_policy ? &*csp_policy : nullptr);
    if (result.metrics.empty()) result.metrics.push_back(initial_row(config, result.agent, seed));

    const fs::path dir = layout.train(config.kind, aug.enabled, seed);
    json extra = env_extra(config);
    extra["augmented"] = aug.enabled;
    agents::save_agent(result.agent, dir, extra);
    const std::string run_id =
        std::string(agents::kind_name(config.kind)) + "-" + arm_name(aug.enabled) + "-" + seed_dir(seed);
    write_text(dir / "metrics.csv", agents::metrics_csv(run_id, csv_rows(config, result.metrics)));
    write_run_manifest(dir, "train", config, seed, started, result.metrics);

    const auto& last = result.metrics.back();
    out << "train " << run_id << " episodes=" << result.episodes_run << " env_steps=" << result.env_steps
        << " avg_reward=" << fmt(last.eval_avg_reward) << " ctr=" << fmt(last.eval_ctr)
        << " buffer=" << result.buffer_size << " (counterfactual " << result.buffer_counterfactual << ") -> "
        << dir.string() << "\n";
}

kernels::EvalResult cmd_eval(const RunConfig& config, std::ostream& out) {
    const std::uint64_t seed = primary_seed(config);
    const Layout layout{config.output_dir};
    const fs::path dir = layout.train(config.kind, config.augment.enabled, seed);
    require_artifact(dir, "trained agent");
    require_same_env(config, dir);
    require_same_agent(config.agent, config.kind, dir);
    const auto loaded = agents::load_agent(dir);
    const auto result =
        agents::evaluate_agent(loaded.agent, config.env, config.eval_episodes, agents::eval_seed_for(seed));
    out << "eval " << agents::kind_name(config.kind) << "-" << arm_name(config.augment.enabled) << "-"
        << seed_dir(seed) << " episodes=" << result.episodes << " avg_reward=" << fmt(result.avg_reward, "%.17g")
        << " ctr=" << fmt(result.ctr, "%.17g") << "\n";
    return result;
}

std::optional<double> improvement_pct(double baseline, double augmented) {
    if (std::abs(baseline) < 1e-12) return std::nullopt;
    return (augmented - baseline) / baseline * 100.0;
}

std::vector<KindAggregate> aggregate_runs(const std::vector<RunSummary>& runs,
                                          const std::vector<agents::AgentKind>& kinds) {
    std::vector<KindAggregate> out;
    for (const auto kind : kinds) {
        KindAggregate agg;
        agg.kind = kind;
        std::map<std::uint64_t, const RunSummary*> base, aug;
        std::vector<double> base_r, aug_r, base_c, aug_c;
        for (const auto& r : runs) {
            if (r.kind != kind) continue;
            (r.augmented ? aug : base)[r.seed] = &r;
            (r.augmented ? aug_r : base_r).push_back(r.final_reward);
            (r.augmented ? aug_c : base_c).push_back(r.final_ctr);
        }
        agg.baseline_reward = mean_of(base_r);
        agg.augmented_reward = mean_of(aug_r);
        agg.baseline_ctr = mean_of(base_c);
        agg.augmented_ctr = mean_of(aug_c);
        agg.improvement_pct = improvement_pct(agg.baseline_reward, agg.augmented_reward);
        agg.ctr_improvement_pct = improvement_pct(agg.baseline_ctr, agg.augmented_ctr);
        for (const auto& [seed, b] : base) {
            const auto it = aug.find(seed);
            if (it == aug.end()) continue;
            ++agg.seeds;
            if (it->second->final_reward >= b->final_reward) ++agg.seeds_augmented_ge_baseline;
        }
        out.push_back(agg);
    }
    return out;
}

json report_to_json(const RunConfig& config, const ComparisonReport& report) {
    json runs = json::array();
    for (const auto& r : report.runs) {
        runs.push_back({{"agent", agents::kind_name(r.kind)},
                        {"arm", arm_name(r.augmented)},
                        {"seed", r.seed},
                        {"budget", r.budget},
                        {"final_eval_avg_reward", r.final_reward},
                        {"final_eval_ctr", r.final_ctr},
                        {"env_steps", r.env_steps},
                        {"curve", r.curve}});
    }
    json aggs = json::array();
    for (const auto& a : report.aggregates) {
        aggs.push_back({{"agent", agents::kind_name(a.kind)},
                        {"budget", compare_budget_for(config, a.kind)},
                        {"baseline_avg_reward", a.baseline_reward},
                        {"augmented_avg_reward", a.augmented_reward},
                        {"improvement_pct", opt_json(a.improvement_pct)},
                        {"baseline_ctr", a.baseline_ctr},
                        {"augmented_ctr", a.augmented_ctr},
                        {"ctr_improvement_pct", opt_json(a.ctr_improvement_pct)},
                        {"seeds_paired", a.seeds},
                        {"seeds_augmented_ge_baseline", a.seeds_augmented_ge_baseline}});
    }
    return {{"schema", "cfrl-compare"},
            {"version", 1},
            {"seeds", config.seeds},
            {"runs", runs},
            {"aggregates", aggs},
            {"failures", report.failures}};
}

std::string format_table(const ComparisonReport& report) {
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof line, "%-6s %14s %14s %12s %12s %12s %12s\n", "Agent", "Baseline", "With CSP",
                  "Improvement", "Base CTR", "CSP CTR", "CTR Impr.");
    out << line;
    for (const auto& a : report.aggregates) {
        std::string name(agents::kind_name(a.kind));
        for (auto& c : name) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        std::snprintf(line, sizeof line, "%-6s %14.6f %14.6f %12s %12.6f %12.6f %12s\n", name.c_str(),
                      a.baseline_reward, a.augmented_reward, fmt_pct(a.improvement_pct).c_str(), a.baseline_ctr,
                      a.augmented_ctr, fmt_pct(a.ctr_improvement_pct).c_str());
        out << line;
    }
    return out.str();
}

ComparisonReport cmd_compare(const RunConfig& config, std::ostream& out) {
    const auto started = Clock::now();
    const Layout layout{config.output_dir};
    const fs::path root = layout.compare();
    const Layout inner{root};
    const std::size_t n_seeds = config.seeds.size();

    // Stage 1: per seed, the observational policy and its CSP.
    std::vector<std::optional<SeedArtifacts>> artifacts(n_seeds);
    std::vector<std::string> seed_errors(n_seeds);
    kernels::for_each_index(n_seeds, [&](std::size_t i) {
        const std::uint64_t seed = config.seeds[i];
        try {
            auto pre = csp::pretrain_policy(config.env, config.agent, config.pretrain_budget, seed,
                                            config.eval_episodes);
            csp::save_pretrained(pre, inner.pretrain(seed), env_extra(config));
            auto trained = csp::train_csp(config.env, pre.policy, config.csp, seed);
            csp::save_csp(trained.csp, inner.csp(seed), env_extra(config));
            write_text(inner.csp(seed) / "csp_log.csv", csp::csp_log_csv(trained.log));
            artifacts[i] = SeedArtifacts{pre.policy, std::move(trained.csp)};
        } catch (const std::exception& e) {
            seed_errors[i] = e.what();
        }
    });

    // Stage 2: kind x arm x seed cells, each with private env and agent.
    struct Cell {
        agents::AgentKind kind;
        bool augmented;
        std::size_t seed_index;
    };
    std::vector<Cell> cells;
    for (const auto kind : config.compare_kinds) {
        for (const bool augmented : {false, true}) {
            for (std::size_t i = 0; i < n_seeds; ++i) cells.push_back({kind, augmented, i});
        }
    }
    std::vector<std::optional<RunSummary>> results(cells.size());
    std::vector<std::string> cell_errors(cells.size());
    std::vector<std::string> curves(cells.size());
    kernels::for_each_index(cells.size(), [&](std::size_t c) {
        const Cell& cell = cells[c];
        const std::uint64_t seed = config.seeds[cell.seed_index];
        try {
            augment::AugmentConfig aug = config.augment;
            aug.enabled = cell.augmented;
            const csp::CspPolicy* csp_policy = nullptr;
            if (cell.augmented) {
                if (!artifacts[cell.seed_index]) {
                    throw StateError("no CSP for " + seed_dir(seed) + ": " + seed_errors[cell.seed_index]);
                }
                csp_policy = &artifacts[cell.seed_index]->csp;
            }
            const std::size_t budget = compare_budget_for(config, cell.kind);
            auto result = augment::train_with_augmentation(cell.kind, config.env, config.agent, aug,
                                                           train_options(config, budget), seed, csp_policy);
            if (result.metrics.empty()) result.metrics.push_back(initial_row(config, result.agent, seed));
            const std::string run_id =
                std::string(agents::kind_name(cell.kind)) + "-" + arm_name(cell.augmented) + "-" + seed_dir(seed);
            RunSummary summary;
            summary.kind = cell.kind;
            summary.augmented = cell.augmented;
            summary.budget = budget;
            summary.seed = seed;
            summary.final_reward = result.metrics.back().eval_avg_reward;
            summary.final_ctr = result.metrics.back().eval_ctr;
            summary.env_steps = result.env_steps;
            summary.curve = "curves/" + run_id + ".csv";
            curves[c] = agents::metrics_csv(run_id, csv_rows(config, result.metrics));
            results[c] = summary;
        } catch (const std::exception& e) {
            cell_errors[c] = e.what();
        }
    });

    // Merge single-threaded, in cell order.
    ComparisonReport report;
    for (std::size_t i = 0; i < n_seeds; ++i) {
        if (!seed_errors[i].empty()) {
            report.failures.push_back("csp/" + seed_dir(config.seeds[i]) + ": " + seed_errors[i]);
        }
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
        if (results[c]) {
            write_text(root / results[c]->curve, curves[c]);
            report.runs.push_back(*results[c]);
        } else {
            report.failures.push_back(std::string(agents::kind_name(cells[c].kind)) + "/" +
                                      arm_name(cells[c].augmented) + "/" +
                                      seed_dir(config.seeds[cells[c].seed_index]) + ": " + cell_errors[c]);
        }
    }
    report.aggregates = aggregate_runs(report.runs, config.compare_kinds);

    const std::string table = format_table(report);
    write_text(root / "report.json", report_to_json(config, report).dump(2) + "\n");
    write_text(root / "failures.json", json(report.failures).dump(2) + "\n");
    write_text(root / "table.txt", table);
    write_run_manifest(root, "compare", config, primary_seed(config), started, {});

    out << table;
    if (!report.failures.empty()) {
        out << report.failures.size() << " cell(s) failed; see " << (root / "failures.json").string() << "\n";
    }
    return report;
}

std::vector<SweepRow> cmd_sweep(const RunConfig& config, std::ostream& out) {
    const auto started = Clock::now();
    const Layout layout{config.output_dir};
    const fs::path root = layout.sweep();

    std::vector<csp::PretrainedPolicy> policies;
    for (const auto seed : config.seeds) {
        const fs::path dir = layout.pretrain(seed);
        require_artifact(dir, "pretrained policy");
        require_same_env(config, dir);
        policies.push_back(csp::load_pretrained(dir));
    }

    const std::size_t n_seeds = config.seeds.size();
    const std::size_t n_cells = config.sweep_hidden.size() * n_seeds;
    std::vector<SweepRow> rows(n_cells);
    std::vector<std::vector<csp::CspLogRow>> logs(n_cells);
    kernels::for_each_index(n_cells, [&](std::size_t c) {
        const std::size_t h = config.sweep_hidden[c / n_seeds];
        const std::size_t s = c % n_seeds;
        csp::CspTrainerConfig cfg = config.csp;
        cfg.agent.hidden = {h, h};
        auto result = csp::train_csp(config.env, policies[s], cfg, config.seeds[s]);
        std::vector<double> curve;
        for (const auto& row : result.log) curve.push_back(row.mean_abs_dr);
        rows[c] = {h, config.seeds[s], tail_mean(curve),
                   csp::evaluate_csp(config.env, policies[s], result.csp, cfg, config.eval_episodes,
                                     agents::eval_seed_for(config.seeds[s]))};
        logs[c] = std::move(result.log);
    });

    char line[256];
    for (std::size_t v = 0; v < config.sweep_hidden.size(); ++v) {
        std::ostringstream csv;
        csv << "hidden,seed,episode,mean_abs_dr,csp_critic_loss,csp_actor_loss\n";
        for (std::size_t s = 0; s < n_seeds; ++s) {
            for (const auto& r : logs[v * n_seeds + s]) {
                std::snprintf(line, sizeof line, "%zu,%llu,%zu,%.17g,%.17g,%.17g\n", config.sweep_hidden[v],
                              static_cast<unsigned long long>(config.seeds[s]), r.episode, r.mean_abs_dr,
                              r.critic_loss, r.actor_loss);
                csv << line;
            }
        }
        write_text(root / ("hidden-" + std::to_string(config.sweep_hidden[v]) + ".csv"), csv.str());
    }
    std::ostringstream agg;
    agg << "hidden,seed,final_mean_abs_dr,eval_mean_abs_dr\n";
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%zu,%llu,%.17g,%.17g\n", r.hidden, static_cast<unsigned long long>(r.seed),
                      r.final_mean_abs_dr, r.eval_mean_abs_dr);
        agg << line;
    }
    write_text(root / "aggregate.csv", agg.str());
    write_run_manifest(root, "sweep", config, primary_seed(config), started, {});

    for (const auto& r : rows) {
        out << "sweep hidden=" << r.hidden << " seed=" << r.seed << " final_mean_abs_dr=" << fmt(r.final_mean_abs_dr)
            << " eval_mean_abs_dr=" << fmt(r.eval_mean_abs_dr) << "\n";
    }
    return rows;
}

}  // namespace cfrl::harness
