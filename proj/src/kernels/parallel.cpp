#include "cfrl/kernels/parallel.hpp"

#include <cstdlib>
#include <exception>
#include <string>
#include <vector>

#include <omp.h>

#include "cfrl/errors.hpp"

namespace cfrl::kernels {
namespace {

struct EpisodeTotals {
    double reward = 0.0;
    std::size_t steps = 0;
};

EpisodeTotals run_episode(const envsim::EnvConfig& config, const PolicyFn& policy,
                          std::uint64_t env_seed) {
    envsim::Env env(config, env_seed);
    EpisodeTotals totals;
    while (!env.done()) {
        const Vector a = policy(env.state().interest);
        totals.reward += env.step(a).reward;
        ++totals.steps;
    }
    return totals;
}

EvalResult reduce(const envsim::EnvConfig& config, const std::vector<EpisodeTotals>& per_episode) {
    EvalResult r;
    r.episodes = per_episode.size();
    if (per_episode.empty()) return r;
    double reward = 0.0;
    double steps = 0.0;
    for (const auto& e : per_episode) {
        reward += e.reward;
        steps += static_cast<double>(e.steps);
    }
    r.avg_reward = reward / static_cast<double>(per_episode.size());
    r.ctr = steps > 0.0 ? reward / (steps * static_cast<double>(config.slots)) : 0.0;
    return r;
}

void check_batch(const MlpParams& params, const Matrix& inputs) {
    if (params.layers.empty()) throw DimensionError("mlp has no layers");
    numkit::require_dim(inputs.cols(), params.in_dim(), "batch input");
}

}  // namespace

int configured_threads() {
    const char* env = std::getenv("CFRL_THREADS");
    if (env == nullptr) return omp_get_max_threads();
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || n < 1) return omp_get_max_threads();
    return static_cast<int>(n);
}

void apply_thread_limit() { omp_set_num_threads(configured_threads()); }

std::uint64_t eval_episode_seed(std::uint64_t seed, std::size_t k) {
    return numkit::Rng(seed).fork("eval-episode", k).next_u64();
}

Matrix forward_batch_reference(const MlpParams& params, const Matrix& inputs) {
    check_batch(params, inputs);
    Matrix out(inputs.rows(), params.out_dim());
    numkit::MlpTrace trace;
    for (std::size_t r = 0; r < inputs.rows(); ++r) {
        const auto& y = numkit::mlp_forward(params, inputs.row(r), trace);
        std::copy(y.begin(), y.end(), out.row(r).begin());
    }
    return out;
}

Matrix forward_batch(const MlpParams& params, const Matrix& inputs) {
    check_batch(params, inputs);
    Matrix out(inputs.rows(), params.out_dim());
    const auto rows = static_cast<std::ptrdiff_t>(inputs.rows());
    std::vector<std::exception_ptr> errors(inputs.rows());
#pragma omp parallel
    {
        numkit::MlpTrace trace;
#pragma omp for schedule(static)
        for (std::ptrdiff_t r = 0; r < rows; ++r) {
            try {
                const auto& y = numkit::mlp_forward(params, inputs.row(r), trace);
                std::copy(y.begin(), y.end(), out.row(r).begin());
            } catch (...) {
                errors[r] = std::current_exception();
            }
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

EvalResult evaluate_reference(const envsim::EnvConfig& config, const PolicyFn& policy,
                              std::size_t episodes, std::uint64_t seed) {
    std::vector<EpisodeTotals> totals(episodes);
    for (std::size_t k = 0; k < episodes; ++k) {
        totals[k] = run_episode(config, policy, eval_episode_seed(seed, k));
    }
    return reduce(config, totals);
}

EvalResult evaluate(const envsim::EnvConfig& config, const PolicyFn& policy, std::size_t episodes,
                    std::uint64_t seed) {
    std::vector<EpisodeTotals> totals(episodes);
    for_each_index(episodes, [&](std::size_t k) {
        totals[k] = run_episode(config, policy, eval_episode_seed(seed, k));
    });
    return reduce(config, totals);
}

void for_each_index_reference(std::size_t n, const std::function<void(std::size_t)>& fn) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
}

void for_each_index(std::size_t n, const std::function<void(std::size_t)>& fn) {
    std::vector<std::exception_ptr> errors(n);
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        try {
            fn(static_cast<std::size_t>(i));
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace cfrl::kernels
