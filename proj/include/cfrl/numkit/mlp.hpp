#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "cfrl/numkit/rng.hpp"
#include "cfrl/numkit/tensor.hpp"

namespace cfrl::numkit {

enum class Activation : std::uint8_t { identity = 0, relu = 1, tanh = 2 };

std::string_view activation_name(Activation act);
Activation activation_from_name(std::string_view name);

struct Layer {
    Matrix weight;  // [out x in]
    Vector bias;    // [out]
    Activation act = Activation::identity;

    std::size_t in_dim() const noexcept { return weight.cols(); }
    std::size_t out_dim() const noexcept { return weight.rows(); }

    friend bool operator==(const Layer&, const Layer&) = default;
};

/// Parameters of a dense feed-forward network.
struct MlpParams {
    std::vector<Layer> layers;

    std::size_t in_dim() const;
    std::size_t out_dim() const;
    std::size_t param_count() const;

    /// Checks dimension chaining and finiteness; throws on violation.
    void validate() const;

    friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

struct LayerGrad {
    Matrix weight;
    Vector bias;
};

/// Gradient (or optimizer moment) with the same shape as an MlpParams.
struct MlpGrads {
    std::vector<LayerGrad> layers;

    static MlpGrads zeros_like(const MlpParams& params);
    void set_zero();
    void scale(double factor);
    /// Largest |component|.
    double max_abs() const;
};

/// Activations recorded by a forward pass, reused by backward.
/// values[0] is the input, values[k + 1] the output of layer k.
struct MlpTrace {
    std::vector<Vector> values;

    const Vector& output() const { return values.back(); }
};

/// Builds a network with the given layer widths (dims.size() >= 2).
/// Weights and biases ~ uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
MlpParams make_mlp(std::span<const std::size_t> dims, Activation hidden, Activation output,
                   Rng& rng);

Vector mlp_forward(const MlpParams& params, std::span<const double> input);

/// Forward pass that keeps every layer's output in `trace`.
const Vector& mlp_forward(const MlpParams& params, std::span<const double> input,
                          MlpTrace& trace);

struct MlpBackward {
    MlpGrads grads;
    Vector input_grad;
};

/// Gradients of a loss whose derivative w.r.t. the network output is `output_grad`.
MlpBackward mlp_backward(const MlpParams& params, std::span<const double> input,
                         std::span<const double> output_grad);

/// Backward pass from a recorded trace. Parameter gradients are ADDED into
/// `grads` when non-null; the input gradient is written to `input_grad` when
/// non-null.
void mlp_backward(const MlpParams& params, const MlpTrace& trace,
                  std::span<const double> output_grad, MlpGrads* grads, Vector* input_grad);

/// Polyak averaging: target <- tau * online + (1 - tau) * target.
void soft_update(MlpParams& target, const MlpParams& online, double tau);

/// Largest |online - target| over all parameters.
double max_abs_diff(const MlpParams& a, const MlpParams& b);

}  // namespace cfrl::numkit
