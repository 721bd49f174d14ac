#pragma once

#include <cstdint>

#include "cfrl/numkit/mlp.hpp"

namespace cfrl::numkit {

struct AdamState {
    MlpGrads m;
    MlpGrads v;
    std::uint64_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState for_params(const MlpParams& params);
};

/// One bias-corrected Adam step. Throws NumericError on non-finite gradients
/// before touching params or state.
void adam_step(MlpParams& params, const MlpGrads& grads, AdamState& state, double lr);

}  // namespace cfrl::numkit
