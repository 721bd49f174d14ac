#pragma once

// Data-parallel kernels. Each OpenMP kernel has a serial reference twin with
// identical results; tests compare the two and the benchmark times them.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

#include "cfrl/envsim/env.hpp"
#include "cfrl/numkit/mlp.hpp"

namespace cfrl::kernels {

using numkit::Matrix;
using numkit::MlpParams;
using numkit::Vector;

/// Worker cap from CFRL_THREADS (unset or invalid: OpenMP default).
int configured_threads();
/// Applies configured_threads() to the OpenMP runtime.
void apply_thread_limit();

/// Row-wise forward pass of `inputs` (one sample per row).
Matrix forward_batch(const MlpParams& params, const Matrix& inputs);
Matrix forward_batch_reference(const MlpParams& params, const Matrix& inputs);

struct EvalResult {
    double avg_reward = 0.0;  // mean total clicks per episode
    double ctr = 0.0;         // clicks / (slots * steps) over all episodes
    std::size_t episodes = 0;
};

/// Must be safe to call concurrently.
using PolicyFn = std::function<Vector(std::span<const double> state)>;

/// Runs `episodes` full episodes; episode k uses env seed derived from (seed, k).
/// Episode results are reduced in index order, so the parallel result is
/// bitwise equal to the reference.
EvalResult evaluate(const envsim::EnvConfig& config, const PolicyFn& policy,
                    std::size_t episodes, std::uint64_t seed);
EvalResult evaluate_reference(const envsim::EnvConfig& config, const PolicyFn& policy,
                              std::size_t episodes, std::uint64_t seed);

/// Env seed for evaluation episode k.
std::uint64_t eval_episode_seed(std::uint64_t seed, std::size_t k);

/// Calls fn(i) for i in [0, n). Iterations must be independent.
/// Exceptions from any iteration are rethrown after the loop (first by index).
void for_each_index(std::size_t n, const std::function<void(std::size_t)>& fn);
void for_each_index_reference(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace cfrl::kernels
