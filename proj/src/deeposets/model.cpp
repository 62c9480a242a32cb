#include "opicl/deeposets/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "opicl/errors.hpp"

namespace opicl::deeposets {

using ndmath::DenseMatrix;
using ndmath::MlpParams;
using ndmath::MlpSpec;

namespace {

MlpSpec make_spec(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
    MlpSpec s;
    s.layer_widths.push_back(in);
    s.layer_widths.insert(s.layer_widths.end(), hidden.begin(), hidden.end());
    s.layer_widths.push_back(out);
    return s;
}

std::vector<std::size_t> hidden_of(const MlpParams& p) {
    std::vector<std::size_t> w = p.widths();
    return {w.begin() + 1, w.end() - 1};
}

std::size_t grid_n_of(const ModelParams& params) { return params.phi.input_width() / 2; }

void check_prompt(const ModelParams& params, Prompt prompt) {
    if (prompt.empty()) throw InvalidArgument("prompt must contain at least one pair");
    const std::size_t n = grid_n_of(params);
    for (std::size_t i = 0; i < prompt.size(); ++i) {
        if (prompt[i].parameter.size() != n || prompt[i].solution.size() != n) {
            throw ShapeError("prompt pair " + std::to_string(i) + " does not have " + std::to_string(n) +
                             " values per function");
        }
    }
}

void check_query(const ModelParams& params, std::span<const double> u_query) {
    if (u_query.size() != grid_n_of(params)) {
        throw ShapeError("query function has " + std::to_string(u_query.size()) + " values, model expects " +
                         std::to_string(grid_n_of(params)));
    }
}

bool pair_less(const FunctionPair& a, const FunctionPair& b) {
    if (a.parameter.values != b.parameter.values) return a.parameter.values < b.parameter.values;
    return a.solution.values < b.solution.values;
}

Vector branch_output(const ModelParams& params, Prompt prompt, std::span<const double> u_query) {
    check_query(params, u_query);
    Vector input = encode_prompt(params, prompt);
    input.insert(input.end(), u_query.begin(), u_query.end());
    return ndmath::mlp_eval(params.branch, input);
}

} // namespace

void ArchConfig::validate() const {
    auto positive = [](std::size_t v, const char* what) {
        if (v == 0) throw InvalidArgument(std::string("ArchConfig: ") + what + " must be positive");
    };
    positive(grid_n, "grid_n");
    positive(latent_dim, "latent_dim");
    positive(basis_dim, "basis_dim");
    for (auto w : phi_hidden) positive(w, "phi hidden width");
    for (auto w : branch_hidden) positive(w, "branch hidden width");
    for (auto w : trunk_hidden) positive(w, "trunk hidden width");
}

MlpSpec ArchConfig::phi_spec() const { return make_spec(2 * grid_n, phi_hidden, latent_dim); }
MlpSpec ArchConfig::branch_spec() const { return make_spec(latent_dim + grid_n, branch_hidden, basis_dim); }
MlpSpec ArchConfig::trunk_spec() const { return make_spec(1, trunk_hidden, basis_dim); }

std::size_t ModelParams::parameter_count() const noexcept {
    return phi.parameter_count() + branch.parameter_count() + trunk.parameter_count() + 1;
}

ModelParams ModelParams::zeros_like() const { return {phi.zeros_like(), branch.zeros_like(), trunk.zeros_like(), 0.0}; }

std::vector<std::span<double>> ModelParams::blocks() {
    std::vector<std::span<double>> out;
    for (MlpParams* net : {&phi, &branch, &trunk}) {
        auto b = net->blocks();
        out.insert(out.end(), b.begin(), b.end());
    }
    out.emplace_back(&output_bias, 1);
    return out;
}

std::vector<std::span<const double>> ModelParams::blocks() const {
    std::vector<std::span<const double>> out;
    for (const MlpParams* net : {&phi, &branch, &trunk}) {
        auto b = net->blocks();
        out.insert(out.end(), b.begin(), b.end());
    }
    out.emplace_back(&output_bias, 1);
    return out;
}

std::vector<std::string> ModelParams::block_names() const {
    std::vector<std::string> names;
    auto add = [&](const MlpParams& net, const char* tag) {
        for (std::size_t l = 0; l < net.layer_count(); ++l) {
            names.push_back(std::string(tag) + ".W" + std::to_string(l));
            names.push_back(std::string(tag) + ".b" + std::to_string(l));
        }
    };
    add(phi, "phi");
    add(branch, "branch");
    add(trunk, "trunk");
    names.emplace_back("output_bias");
    return names;
}

ModelParams init_params(const ArchConfig& arch, ndmath::Rng& rng) {
    arch.validate();
    ModelParams p;
    p.phi = ndmath::init_mlp(arch.phi_spec(), rng);
    p.branch = ndmath::init_mlp(arch.branch_spec(), rng);
    p.trunk = ndmath::init_mlp(arch.trunk_spec(), rng);
    p.output_bias = 0.0;
    return p;
}

ArchConfig arch_of(const ModelParams& params) {
    params.phi.validate();
    params.branch.validate();
    params.trunk.validate();
    ArchConfig a;
    a.grid_n = params.phi.input_width() / 2;
    a.phi_hidden = hidden_of(params.phi);
    a.latent_dim = params.phi.output_width();
    a.branch_hidden = hidden_of(params.branch);
    a.trunk_hidden = hidden_of(params.trunk);
    a.basis_dim = params.branch.output_width();
    check_params(params, a);
    return a;
}

void check_params(const ModelParams& params, const ArchConfig& arch) {
    auto check = [](const MlpParams& net, const MlpSpec& spec, const char* name) {
        net.validate();
        if (net.widths() != spec.layer_widths) throw ShapeError(std::string(name) + " network shape does not match architecture");
    };
    check(params.phi, arch.phi_spec(), "phi");
    check(params.branch, arch.branch_spec(), "branch");
    check(params.trunk, arch.trunk_spec(), "trunk");
}

Vector encode_prompt(const ModelParams& params, Prompt prompt) {
    check_prompt(params, prompt);
    std::vector<std::size_t> order(prompt.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return pair_less(prompt[a], prompt[b]); });

    const std::size_t n = grid_n_of(params);
    Vector input(2 * n);
    Vector latent(params.phi.output_width(), 0.0);
    for (std::size_t idx : order) {
        std::copy(prompt[idx].parameter.values.begin(), prompt[idx].parameter.values.end(), input.begin());
        std::copy(prompt[idx].solution.values.begin(), prompt[idx].solution.values.end(), input.begin() + std::ptrdiff_t(n));
        const Vector h = ndmath::mlp_eval(params.phi, input);
        for (std::size_t j = 0; j < latent.size(); ++j) latent[j] += h[j];
    }
    const double m = double(prompt.size());
    for (double& v : latent) v /= m;
    return latent;
}

double forward(const ModelParams& params, const PredictionRequest& req) {
    const Vector b = branch_output(params, req.prompt, req.u_query);
    const double x = req.x_query;
    const Vector t = ndmath::mlp_eval(params.trunk, std::span<const double>(&x, 1));
    return ndmath::dot(b, t) + params.output_bias;
}

Vector predict_function(const ModelParams& params, Prompt prompt, std::span<const double> u_query,
                        std::span<const double> points) {
    const Vector b = branch_output(params, prompt, u_query);
    const DenseMatrix coords(points.size(), 1, Vector(points.begin(), points.end()));
    const DenseMatrix t = ndmath::mlp_forward_batch(params.trunk, coords);
    Vector out(points.size());
    for (std::size_t k = 0; k < points.size(); ++k) out[k] = ndmath::dot(b, t.row(k)) + params.output_bias;
    return out;
}

pdegen::GridFunction predict_function(const ModelParams& params, Prompt prompt, std::span<const double> u_query,
                                      const pdegen::Grid& grid) {
    return {predict_function(params, prompt, u_query, grid.points())};
}

namespace {

struct BatchForward {
    ndmath::MlpBatchTape phi_tape, branch_tape, trunk_tape;
    DenseMatrix branch_out, trunk_out, residual; // residual = prediction - target
    std::vector<std::size_t> offsets;            // prompt row range per instance
};

BatchForward batch_forward(const ModelParams& params, std::span<const pdegen::OperatorInstance* const> batch,
                           const pdegen::Grid& grid, bool keep_tapes) {
    if (batch.empty()) throw InvalidArgument("loss_and_gradients: empty batch");
    const std::size_t n = grid_n_of(params);
    if (grid.size() != n) throw ShapeError("loss_and_gradients: grid does not match the model's grid_n");
    const std::size_t latent_dim = params.phi.output_width();

    BatchForward fw;
    fw.offsets.push_back(0);
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& inst = *batch[b];
        check_prompt(params, inst.prompt);
        check_query(params, inst.query.parameter.values);
        if (inst.query.solution.size() != n) throw ShapeError("query solution length does not match grid_n");
        fw.offsets.push_back(fw.offsets.back() + inst.prompt.size());
    }

    DenseMatrix phi_in(fw.offsets.back(), 2 * n);
    for (std::size_t b = 0; b < batch.size(); ++b) {
        for (std::size_t i = 0; i < batch[b]->prompt.size(); ++i) {
            auto row = phi_in.row(fw.offsets[b] + i);
            const auto& pair = batch[b]->prompt[i];
            std::copy(pair.parameter.values.begin(), pair.parameter.values.end(), row.begin());
            std::copy(pair.solution.values.begin(), pair.solution.values.end(), row.begin() + std::ptrdiff_t(n));
        }
    }
    const DenseMatrix phi_out = ndmath::mlp_forward_batch(params.phi, phi_in, keep_tapes ? &fw.phi_tape : nullptr);

    DenseMatrix branch_in(batch.size(), latent_dim + n);
    for (std::size_t b = 0; b < batch.size(); ++b) {
        auto row = branch_in.row(b);
        const double inv_m = 1.0 / double(batch[b]->prompt.size());
        for (std::size_t r = fw.offsets[b]; r < fw.offsets[b + 1]; ++r) {
            const auto h = phi_out.row(r);
            for (std::size_t j = 0; j < latent_dim; ++j) row[j] += h[j];
        }
        for (std::size_t j = 0; j < latent_dim; ++j) row[j] *= inv_m;
        const auto& uq = batch[b]->query.parameter.values;
        std::copy(uq.begin(), uq.end(), row.begin() + std::ptrdiff_t(latent_dim));
    }
    fw.branch_out = ndmath::mlp_forward_batch(params.branch, branch_in, keep_tapes ? &fw.branch_tape : nullptr);

    const DenseMatrix coords(n, 1, Vector(grid.points().begin(), grid.points().end()));
    fw.trunk_out = ndmath::mlp_forward_batch(params.trunk, coords, keep_tapes ? &fw.trunk_tape : nullptr);

    fw.residual = DenseMatrix(batch.size(), n);
    fw.residual.map().noalias() = fw.branch_out.map() * fw.trunk_out.map().transpose();
    for (std::size_t b = 0; b < batch.size(); ++b) {
        auto row = fw.residual.row(b);
        const auto& y = batch[b]->query.solution.values;
        for (std::size_t k = 0; k < n; ++k) row[k] += params.output_bias - y[k];
    }
    return fw;
}

double mean_square(const DenseMatrix& residual) {
    double loss = 0.0;
    for (std::size_t b = 0; b < residual.rows(); ++b) {
        double s = 0.0;
        for (double r : residual.row(b)) s += r * r;
        if (!std::isfinite(s)) throw NumericError("non-finite loss at batch instance " + std::to_string(b));
        loss += s;
    }
    return loss / double(residual.size());
}

} // namespace

double batch_loss(const ModelParams& params, std::span<const pdegen::OperatorInstance* const> batch,
                  const pdegen::Grid& grid) {
    return mean_square(batch_forward(params, batch, grid, false).residual);
}

LossAndGradients loss_and_gradients(const ModelParams& params, std::span<const pdegen::OperatorInstance* const> batch,
                                    const pdegen::Grid& grid) {
    BatchForward fw = batch_forward(params, batch, grid, true);
    LossAndGradients out;
    out.loss = mean_square(fw.residual);
    out.grads = params.zeros_like();

    // d loss / d prediction
    DenseMatrix d_pred = std::move(fw.residual);
    const double scale = 2.0 / double(d_pred.size());
    for (double& v : d_pred.flat()) v *= scale;
    double bias_grad = 0.0;
    for (double v : d_pred.flat()) bias_grad += v;
    out.grads.output_bias = bias_grad;

    DenseMatrix d_branch(d_pred.rows(), fw.branch_out.cols());
    d_branch.map().noalias() = d_pred.map() * fw.trunk_out.map();
    DenseMatrix d_trunk(d_pred.cols(), fw.trunk_out.cols());
    d_trunk.map().noalias() = d_pred.map().transpose() * fw.branch_out.map();

    ndmath::mlp_backward_batch(params.trunk, fw.trunk_tape, d_trunk, out.grads.trunk);
    DenseMatrix d_branch_in;
    ndmath::mlp_backward_batch(params.branch, fw.branch_tape, d_branch, out.grads.branch, &d_branch_in);

    const std::size_t latent_dim = params.phi.output_width();
    DenseMatrix d_phi(fw.offsets.back(), latent_dim);
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const double inv_m = 1.0 / double(fw.offsets[b + 1] - fw.offsets[b]);
        const auto g = d_branch_in.row(b);
        for (std::size_t r = fw.offsets[b]; r < fw.offsets[b + 1]; ++r) {
            auto row = d_phi.row(r);
            for (std::size_t j = 0; j < latent_dim; ++j) row[j] = g[j] * inv_m;
        }
    }
    ndmath::mlp_backward_batch(params.phi, fw.phi_tape, d_phi, out.grads.phi);
    return out;
}

LossAndGradients loss_and_gradients(const ModelParams& params, std::span<const pdegen::OperatorInstance> batch,
                                    const pdegen::Grid& grid) {
    std::vector<const pdegen::OperatorInstance*> ptrs;
    ptrs.reserve(batch.size());
    for (const auto& inst : batch) ptrs.push_back(&inst);
    return loss_and_gradients(params, ptrs, grid);
}

} // namespace opicl::deeposets
