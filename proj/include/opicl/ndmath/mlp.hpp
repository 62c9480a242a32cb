#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "opicl/ndmath/dense_matrix.hpp"
#include "opicl/ndmath/rng.hpp"

namespace opicl::ndmath {

enum class Activation { relu };

/// Layer widths (input, hidden..., output). ReLU on hidden layers, identity on output.
struct MlpSpec {
    std::vector<std::size_t> layer_widths;
    Activation activation = Activation::relu;

    std::size_t layer_count() const noexcept { return layer_widths.empty() ? 0 : layer_widths.size() - 1; }
    std::size_t input_width() const { return layer_widths.front(); }
    std::size_t output_width() const { return layer_widths.back(); }
    void validate() const;
};

/// weights[l] has shape (width[l+1], width[l]); layer l computes W x + b.
struct MlpParams {
    std::vector<DenseMatrix> weights;
    std::vector<Vector> biases;

    std::size_t layer_count() const noexcept { return weights.size(); }
    std::size_t input_width() const { return weights.front().cols(); }
    std::size_t output_width() const { return weights.back().rows(); }
    std::size_t parameter_count() const noexcept;
    std::vector<std::size_t> widths() const;

    /// Zero-filled params of the same shape.
    MlpParams zeros_like() const;
    /// Shape consistency between consecutive layers and bias lengths.
    void validate() const;

    /// Flat views, ordered (W0, b0, W1, b1, ...).
    std::vector<std::span<double>> blocks();
    std::vector<std::span<const double>> blocks() const;

    friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

/// Glorot-uniform weights, zero biases.
MlpParams init_mlp(const MlpSpec& spec, Rng& rng);

/// Post-activation values of every layer for one input; layer 0 is the input.
struct MlpTape {
    std::vector<Vector> activations;
    std::vector<std::size_t> widths;
};

struct MlpForwardResult {
    Vector output;
    MlpTape tape;
};

MlpForwardResult mlp_forward(const MlpParams& params, std::span<const double> input);
/// Output only, no tape.
Vector mlp_eval(const MlpParams& params, std::span<const double> input);

struct MlpBackwardResult {
    MlpParams param_grads;
    Vector input_grad;
};

/// Gradients of <output_grad, output> with respect to params and input.
MlpBackwardResult mlp_backward(const MlpParams& params, const MlpTape& tape, std::span<const double> output_grad);

/// Batched tape: activations[l] has one row per sample.
struct MlpBatchTape {
    std::vector<DenseMatrix> activations;
};

/// Forward a batch of inputs stored as rows.
DenseMatrix mlp_forward_batch(const MlpParams& params, const DenseMatrix& inputs, MlpBatchTape* tape = nullptr);

/// Accumulates batch-summed parameter gradients into `grads` and returns the
/// per-row input gradient when `input_grad` is non-null.
void mlp_backward_batch(const MlpParams& params, const MlpBatchTape& tape, const DenseMatrix& output_grad,
                        MlpParams& grads, DenseMatrix* input_grad = nullptr);

} // namespace opicl::ndmath
