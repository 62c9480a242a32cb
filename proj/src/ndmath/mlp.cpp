#include "opicl/ndmath/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "opicl/errors.hpp"

namespace opicl::ndmath {

namespace {

std::string layer_label(std::size_t l) { return "layer " + std::to_string(l); }

void relu_inplace(std::span<double> v) {
    for (double& x : v) x = x > 0.0 ? x : 0.0;
}

} // namespace

void MlpSpec::validate() const {
    if (layer_widths.size() < 2) throw ShapeError("MlpSpec: need at least input and output widths");
    for (std::size_t i = 0; i < layer_widths.size(); ++i) {
        if (layer_widths[i] == 0) throw ShapeError("MlpSpec: width " + std::to_string(i) + " is zero");
    }
}

std::size_t MlpParams::parameter_count() const noexcept {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
}

std::vector<std::size_t> MlpParams::widths() const {
    std::vector<std::size_t> w;
    if (weights.empty()) return w;
    w.push_back(weights.front().cols());
    for (const auto& m : weights) w.push_back(m.rows());
    return w;
}

MlpParams MlpParams::zeros_like() const {
    MlpParams z;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        z.weights.emplace_back(weights[l].rows(), weights[l].cols());
        z.biases.emplace_back(biases[l].size(), 0.0);
    }
    return z;
}

void MlpParams::validate() const {
    if (weights.empty()) throw ShapeError("MlpParams: no layers");
    if (weights.size() != biases.size()) {
        throw ShapeError("MlpParams: " + std::to_string(weights.size()) + " weight matrices but " +
                         std::to_string(biases.size()) + " bias vectors");
    }
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (biases[l].size() != weights[l].rows()) {
            throw ShapeError("MlpParams: " + layer_label(l) + " bias length " + std::to_string(biases[l].size()) +
                             " != output width " + std::to_string(weights[l].rows()));
        }
        if (l > 0 && weights[l].cols() != weights[l - 1].rows()) {
            throw ShapeError("MlpParams: " + layer_label(l) + " expects input width " +
                             std::to_string(weights[l].cols()) + " but previous layer emits " +
                             std::to_string(weights[l - 1].rows()));
        }
    }
}

std::vector<std::span<double>> MlpParams::blocks() {
    std::vector<std::span<double>> out;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        out.push_back(weights[l].flat());
        out.push_back(biases[l]);
    }
    return out;
}

std::vector<std::span<const double>> MlpParams::blocks() const {
    std::vector<std::span<const double>> out;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        out.push_back(weights[l].flat());
        out.push_back(biases[l]);
    }
    return out;
}

MlpParams init_mlp(const MlpSpec& spec, Rng& rng) {
    spec.validate();
    MlpParams p;
    for (std::size_t l = 0; l + 1 < spec.layer_widths.size(); ++l) {
        const std::size_t fan_in = spec.layer_widths[l];
        const std::size_t fan_out = spec.layer_widths[l + 1];
        const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
        DenseMatrix w(fan_out, fan_in);
        for (double& x : w.flat()) x = rng.uniform(-limit, limit);
        p.weights.push_back(std::move(w));
        p.biases.emplace_back(fan_out, 0.0);
    }
    return p;
}

MlpForwardResult mlp_forward(const MlpParams& params, std::span<const double> input) {
    params.validate();
    if (input.size() != params.input_width()) {
        throw ShapeError("mlp_forward: layer 0 expects input width " + std::to_string(params.input_width()) +
                         ", got " + std::to_string(input.size()));
    }
    MlpForwardResult res;
    res.tape.widths = params.widths();
    res.tape.activations.reserve(params.layer_count() + 1);
    res.tape.activations.emplace_back(input.begin(), input.end());
    const std::size_t last = params.layer_count() - 1;
    for (std::size_t l = 0; l <= last; ++l) {
        Vector z = matvec(params.weights[l], res.tape.activations.back());
        for (std::size_t i = 0; i < z.size(); ++i) z[i] += params.biases[l][i];
        if (l != last) relu_inplace(z);
        res.tape.activations.push_back(std::move(z));
    }
    res.output = res.tape.activations.back();
    return res;
}

Vector mlp_eval(const MlpParams& params, std::span<const double> input) {
    return mlp_forward(params, input).output;
}

MlpBackwardResult mlp_backward(const MlpParams& params, const MlpTape& tape, std::span<const double> output_grad) {
    params.validate();
    if (tape.widths != params.widths() || tape.activations.size() != params.layer_count() + 1) {
        throw ShapeError("mlp_backward: tape was not produced by these params");
    }
    for (std::size_t l = 0; l < tape.activations.size(); ++l) {
        if (tape.activations[l].size() != tape.widths[l]) {
            throw ShapeError("mlp_backward: tape activation " + std::to_string(l) + " has the wrong length");
        }
    }
    if (output_grad.size() != params.output_width()) {
        throw ShapeError("mlp_backward: output gradient length " + std::to_string(output_grad.size()) +
                         " != output width " + std::to_string(params.output_width()));
    }

    MlpBackwardResult res;
    res.param_grads = params.zeros_like();
    Vector g(output_grad.begin(), output_grad.end());
    const std::size_t last = params.layer_count() - 1;
    for (std::size_t l = last + 1; l-- > 0;) {
        if (l != last) {
            // ReLU'(z) = 1 iff z > 0, which is iff the stored activation is > 0.
            const Vector& a = tape.activations[l + 1];
            for (std::size_t i = 0; i < g.size(); ++i)
                if (!(a[i] > 0.0)) g[i] = 0.0;
        }
        const Vector& in = tape.activations[l];
        DenseMatrix& gw = res.param_grads.weights[l];
        gw.map().noalias() = as_eigen(std::span<const double>(g)) * as_eigen(std::span<const double>(in)).transpose();
        res.param_grads.biases[l] = g;
        Vector prev(in.size(), 0.0);
        as_eigen(std::span<double>(prev)).noalias() =
            params.weights[l].map().transpose() * as_eigen(std::span<const double>(g));
        g = std::move(prev);
    }
    res.input_grad = std::move(g);
    return res;
}

DenseMatrix mlp_forward_batch(const MlpParams& params, const DenseMatrix& inputs, MlpBatchTape* tape) {
    params.validate();
    if (inputs.cols() != params.input_width()) {
        throw ShapeError("mlp_forward_batch: layer 0 expects input width " + std::to_string(params.input_width()) +
                         ", got " + std::to_string(inputs.cols()));
    }
    const std::size_t last = params.layer_count() - 1;
    DenseMatrix current = inputs;
    if (tape) {
        tape->activations.clear();
        tape->activations.reserve(params.layer_count() + 1);
    }
    for (std::size_t l = 0; l <= last; ++l) {
        const DenseMatrix& w = params.weights[l];
        DenseMatrix z(current.rows(), w.rows());
        z.map().noalias() = current.map() * w.map().transpose();
        z.map().rowwise() += as_eigen(std::span<const double>(params.biases[l])).transpose();
        if (l != last) relu_inplace(z.flat());
        if (tape) tape->activations.push_back(std::move(current));
        current = std::move(z);
    }
    if (tape) tape->activations.push_back(current);
    return current;
}

void mlp_backward_batch(const MlpParams& params, const MlpBatchTape& tape, const DenseMatrix& output_grad,
                        MlpParams& grads, DenseMatrix* input_grad) {
    if (tape.activations.size() != params.layer_count() + 1) {
        throw ShapeError("mlp_backward_batch: tape was not produced by these params");
    }
    const std::size_t rows = output_grad.rows();
    for (std::size_t l = 0; l < tape.activations.size(); ++l) {
        const std::size_t expect = l == 0 ? params.input_width() : params.weights[l - 1].rows();
        if (tape.activations[l].cols() != expect || tape.activations[l].rows() != rows) {
            throw ShapeError("mlp_backward_batch: tape activation " + std::to_string(l) + " has the wrong shape");
        }
    }
    if (output_grad.cols() != params.output_width()) {
        throw ShapeError("mlp_backward_batch: output gradient width mismatch");
    }
    if (grads.widths() != params.widths()) throw ShapeError("mlp_backward_batch: gradient buffer shape mismatch");

    const std::size_t last = params.layer_count() - 1;
    DenseMatrix g = output_grad;
    for (std::size_t l = last + 1; l-- > 0;) {
        if (l != last) {
            const auto a = tape.activations[l + 1].flat();
            auto gf = g.flat();
            for (std::size_t i = 0; i < gf.size(); ++i)
                if (!(a[i] > 0.0)) gf[i] = 0.0;
        }
        const DenseMatrix& in = tape.activations[l];
        grads.weights[l].map().noalias() += g.map().transpose() * in.map();
        as_eigen(std::span<double>(grads.biases[l])) += g.map().colwise().sum().transpose();
        if (l == 0 && !input_grad) break;
        DenseMatrix prev(rows, in.cols());
        prev.map().noalias() = g.map() * params.weights[l].map();
        g = std::move(prev);
    }
    if (input_grad) *input_grad = std::move(g);
}

} // namespace opicl::ndmath
