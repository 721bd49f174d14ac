#include "cfrl/numkit/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cfrl/errors.hpp"

namespace cfrl::numkit {
namespace {

// Four independent partial sums; fixed order, so results stay bitwise stable.
inline double dot4(const double* a, const double* b, std::size_t n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

inline double activate(Activation act, double x) {
    switch (act) {
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::tanh: return std::tanh(x);
    case Activation::identity: break;
    }
    return x;
}

// Derivative expressed through the activation's output value.
inline double activation_slope(Activation act, double y) {
    switch (act) {
    case Activation::relu: return y > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: return 1.0 - y * y;
    case Activation::identity: break;
    }
    return 1.0;
}

void layer_forward(const Layer& layer, const double* x, double* y) {
    const std::size_t in = layer.in_dim();
    const double* w = layer.weight.data().data();
    for (std::size_t i = 0; i < layer.out_dim(); ++i) {
        y[i] = activate(layer.act, layer.bias[i] + dot4(w + i * in, x, in));
    }
}

}  // namespace

std::string_view activation_name(Activation act) {
    switch (act) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    }
    return "?";
}

Activation activation_from_name(std::string_view name) {
    if (name == "identity") return Activation::identity;
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    throw ConfigError("unknown activation '" + std::string(name) + "'");
}

std::size_t MlpParams::in_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
std::size_t MlpParams::out_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }

std::size_t MlpParams::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
}

void MlpParams::validate() const {
    if (layers.empty()) throw DimensionError("mlp has no layers");
    for (std::size_t k = 0; k < layers.size(); ++k) {
        const auto& l = layers[k];
        const std::string tag = "layer " + std::to_string(k);
        if (l.in_dim() == 0 || l.out_dim() == 0) throw DimensionError(tag + " has a zero dimension");
        require_dim(l.bias.size(), l.out_dim(), tag + " bias");
        if (k > 0) require_dim(l.in_dim(), layers[k - 1].out_dim(), tag + " input");
        require_finite(l.weight.data(), tag + " weight");
        require_finite(l.bias, tag + " bias");
    }
}

MlpGrads MlpGrads::zeros_like(const MlpParams& params) {
    MlpGrads g;
    g.layers.reserve(params.layers.size());
    for (const auto& l : params.layers) {
        g.layers.push_back({Matrix(l.out_dim(), l.in_dim()), Vector(l.out_dim(), 0.0)});
    }
    return g;
}

void MlpGrads::set_zero() {
    for (auto& l : layers) {
        std::fill(l.weight.data().begin(), l.weight.data().end(), 0.0);
        std::fill(l.bias.begin(), l.bias.end(), 0.0);
    }
}

void MlpGrads::scale(double factor) {
    for (auto& l : layers) {
        for (auto& w : l.weight.data()) w *= factor;
        for (auto& b : l.bias) b *= factor;
    }
}

double MlpGrads::max_abs() const {
    double m = 0.0;
    for (const auto& l : layers) {
        for (double w : l.weight.data()) m = std::max(m, std::abs(w));
        for (double b : l.bias) m = std::max(m, std::abs(b));
    }
    return m;
}

MlpParams make_mlp(std::span<const std::size_t> dims, Activation hidden, Activation output,
                   Rng& rng) {
    if (dims.size() < 2) throw DimensionError("make_mlp needs at least input and output widths");
    MlpParams p;
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        const std::size_t in = dims[k];
        const std::size_t out = dims[k + 1];
        if (in == 0 || out == 0) throw DimensionError("make_mlp: zero layer width");
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        Layer layer{Matrix(out, in), Vector(out), k + 2 == dims.size() ? output : hidden};
        for (auto& w : layer.weight.data()) w = rng.uniform(-bound, bound);
        for (auto& b : layer.bias) b = rng.uniform(-bound, bound);
        p.layers.push_back(std::move(layer));
    }
    return p;
}

Vector mlp_forward(const MlpParams& params, std::span<const double> input) {
    MlpTrace trace;
    return mlp_forward(params, input, trace);
}

const Vector& mlp_forward(const MlpParams& params, std::span<const double> input,
                          MlpTrace& trace) {
    if (params.layers.empty()) throw DimensionError("mlp has no layers");
    require_dim(input.size(), params.in_dim(), "mlp input");
    require_finite(input, "mlp input");
    trace.values.resize(params.layers.size() + 1);
    trace.values[0].assign(input.begin(), input.end());
    for (std::size_t k = 0; k < params.layers.size(); ++k) {
        const auto& layer = params.layers[k];
        auto& out = trace.values[k + 1];
        out.resize(layer.out_dim());
        layer_forward(layer, trace.values[k].data(), out.data());
    }
    return trace.values.back();
}

MlpBackward mlp_backward(const MlpParams& params, std::span<const double> input,
                         std::span<const double> output_grad) {
    MlpTrace trace;
    mlp_forward(params, input, trace);
    MlpBackward result{MlpGrads::zeros_like(params), {}};
    mlp_backward(params, trace, output_grad, &result.grads, &result.input_grad);
    return result;
}

void mlp_backward(const MlpParams& params, const MlpTrace& trace,
                  std::span<const double> output_grad, MlpGrads* grads, Vector* input_grad) {
    const std::size_t depth = params.layers.size();
    if (depth == 0) throw DimensionError("mlp has no layers");
    if (trace.values.size() != depth + 1) throw DimensionError("trace does not match network depth");
    require_dim(output_grad.size(), params.out_dim(), "mlp output gradient");
    if (grads && grads->layers.size() != depth) throw DimensionError("gradient buffer depth mismatch");

    Vector delta(output_grad.begin(), output_grad.end());
    Vector upstream;
    for (std::size_t k = depth; k-- > 0;) {
        const auto& layer = params.layers[k];
        const auto& y = trace.values[k + 1];
        const auto& x = trace.values[k];
        const std::size_t in = layer.in_dim();
        const std::size_t out = layer.out_dim();
        for (std::size_t i = 0; i < out; ++i) delta[i] *= activation_slope(layer.act, y[i]);

        if (grads) {
            auto& g = grads->layers[k];
            double* gw = g.weight.data().data();
            for (std::size_t i = 0; i < out; ++i) {
                const double d = delta[i];
                double* row = gw + i * in;
                for (std::size_t j = 0; j < in; ++j) row[j] += d * x[j];
                g.bias[i] += d;
            }
        }
        if (k == 0 && !input_grad) break;

        upstream.assign(in, 0.0);
        const double* w = layer.weight.data().data();
        for (std::size_t i = 0; i < out; ++i) {
            const double d = delta[i];
            const double* row = w + i * in;
            for (std::size_t j = 0; j < in; ++j) upstream[j] += row[j] * d;
        }
        delta.swap(upstream);
    }
    if (input_grad) *input_grad = std::move(delta);
}

void soft_update(MlpParams& target, const MlpParams& online, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("soft_update: tau must lie in [0, 1]");
    require_dim(target.layers.size(), online.layers.size(), "soft_update depth");
    for (std::size_t k = 0; k < target.layers.size(); ++k) {
        auto& t = target.layers[k];
        const auto& o = online.layers[k];
        require_dim(t.weight.rows(), o.weight.rows(), "soft_update rows");
        require_dim(t.weight.cols(), o.weight.cols(), "soft_update cols");
        require_dim(t.bias.size(), o.bias.size(), "soft_update bias");
        const double keep = 1.0 - tau;
        auto& tw = t.weight.data();
        const auto& ow = o.weight.data();
        for (std::size_t i = 0; i < tw.size(); ++i) tw[i] = tau * ow[i] + keep * tw[i];
        for (std::size_t i = 0; i < t.bias.size(); ++i) t.bias[i] = tau * o.bias[i] + keep * t.bias[i];
    }
}

double max_abs_diff(const MlpParams& a, const MlpParams& b) {
    require_dim(a.layers.size(), b.layers.size(), "max_abs_diff depth");
    double m = 0.0;
    for (std::size_t k = 0; k < a.layers.size(); ++k) {
        const auto& aw = a.layers[k].weight.data();
        const auto& bw = b.layers[k].weight.data();
        require_dim(aw.size(), bw.size(), "max_abs_diff weight");
        for (std::size_t i = 0; i < aw.size(); ++i) m = std::max(m, std::abs(aw[i] - bw[i]));
        for (std::size_t i = 0; i < a.layers[k].bias.size(); ++i) {
            m = std::max(m, std::abs(a.layers[k].bias[i] - b.layers[k].bias[i]));
        }
    }
    return m;
}

}  // namespace cfrl::numkit
