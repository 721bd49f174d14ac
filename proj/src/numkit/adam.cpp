#include "cfrl/numkit/adam.hpp"

#include <cmath>
#include <limits>

#include "cfrl/errors.hpp"

namespace cfrl::numkit {
namespace {

void adam_apply(std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                std::vector<double>& v, const AdamState& s, double step, double bc2) {
    for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
        v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
        // Moments of dead units decay into subnormals, which are very slow.
        if (std::fabs(m[i]) < std::numeric_limits<double>::min()) m[i] = 0.0;
        if (v[i] < std::numeric_limits<double>::min()) v[i] = 0.0;
        p[i] -= step * m[i] / (std::sqrt(v[i] / bc2) + s.eps);
    }
}

}  // namespace

AdamState AdamState::for_params(const MlpParams& params) {
    AdamState s;
    s.m = MlpGrads::zeros_like(params);
    s.v = MlpGrads::zeros_like(params);
    return s;
}

void adam_step(MlpParams& params, const MlpGrads& grads, AdamState& state, double lr) {
    if (!(lr > 0.0)) throw ConfigError("adam_step: learning rate must be positive");
    const std::size_t depth = params.layers.size();
    require_dim(grads.layers.size(), depth, "adam gradient depth");
    require_dim(state.m.layers.size(), depth, "adam state depth");
    for (std::size_t k = 0; k < depth; ++k) {
        require_dim(grads.layers[k].weight.size(), params.layers[k].weight.size(), "adam weight grad");
        require_dim(grads.layers[k].bias.size(), params.layers[k].bias.size(), "adam bias grad");
        require_finite(grads.layers[k].weight.data(), "adam weight gradient");
        require_finite(grads.layers[k].bias, "adam bias gradient");
    }

    ++state.t;
    const double t = static_cast<double>(state.t);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    const double step = lr / bc1;
    for (std::size_t k = 0; k < depth; ++k) {
        auto& layer = params.layers[k];
        adam_apply(layer.weight.data(), grads.layers[k].weight.data(), state.m.layers[k].weight.data(),
                   state.v.layers[k].weight.data(), state, step, bc2);
        adam_apply(layer.bias, grads.layers[k].bias, state.m.layers[k].bias,
                   state.v.layers[k].bias, state, step, bc2);
    }
}

}  // namespace cfrl::numkit
