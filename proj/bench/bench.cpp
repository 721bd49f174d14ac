// Times each OpenMP kernel against its serial reference and checks the
// outputs agree. Usage: cfrl_bench [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>

#include <omp.h>

#include "cfrl/agents/training.hpp"
#include "cfrl/kernels/parallel.hpp"

using namespace cfrl;

namespace {

double best_ms(int repeats, const std::function<void()>& fn) {
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

void report(const char* name, double serial, double parallel, bool same) {
    std::printf("%-16s serial %9.2f ms  parallel %9.2f ms  speedup %5.2fx  identical=%s\n", name, serial, parallel,
                serial / parallel, same ? "yes" : "NO");
}

}  // namespace

int main(int argc, char** argv) {
    const int repeats = argc > 1 ? std::max(1, std::atoi(argv[1])) : 5;
    kernels::apply_thread_limit();
    std::printf("threads: %d\n", omp_get_max_threads());

    numkit::Rng rng(1);
    envsim::EnvConfig env;
    agents::AgentConfig cfg;
    const auto agent = agents::make_agent(agents::AgentKind::ddpg, cfg, env.state_dim, env.action_dim, rng);

    numkit::Matrix inputs(4096, env.state_dim);
    for (auto& x : inputs.data()) x = rng.uniform(-1, 1);
    numkit::Matrix a, b;
    const double fs = best_ms(repeats, [&] { a = kernels::forward_batch_reference(agent.actor, inputs); });
    const double fp = best_ms(repeats, [&] { b = kernels::forward_batch(agent.actor, inputs); });
    report("forward_batch", fs, fp, a == b);

    const kernels::PolicyFn policy = [&](std::span<const double> s) { return agents::greedy_action(agent, s); };
    kernels::EvalResult ea, eb;
    const double es = best_ms(repeats, [&] { ea = kernels::evaluate_reference(env, policy, 32, 7); });
    const double ep = best_ms(repeats, [&] { eb = kernels::evaluate(env, policy, 32, 7); });
    report("evaluate", es, ep, ea.avg_reward == eb.avg_reward && ea.ctr == eb.ctr);

    std::vector<double> ra(64), rb(64);
    const auto cell = [&](std::vector<double>& out) {
        return [&out, &agent](std::size_t i) {
            numkit::Rng r(i);
            double acc = 0.0;
            for (int k = 0; k < 200; ++k) {
                numkit::Vector s(16);
                for (auto& x : s) x = r.uniform(-1, 1);
                acc += agents::greedy_action(agent, s)[0];
            }
            out[i] = acc;
        };
    };
    const double ls = best_ms(repeats, [&] { kernels::for_each_index_reference(64, cell(ra)); });
    const double lp = best_ms(repeats, [&] { kernels::for_each_index(64, cell(rb)); });
    report("for_each_index", ls, lp, ra == rb);
    return 0;
}
