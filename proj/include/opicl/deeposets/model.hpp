#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "opicl/ndmath/mlp.hpp"
#include "opicl/ndmath/rng.hpp"
#include "opicl/pdegen/grid.hpp"
#include "opicl/pdegen/instance.hpp"

namespace opicl::deeposets {

using ndmath::Vector;
using pdegen::FunctionPair;

/// Network sizes. φ maps a concatenated (u_i, G(u_i)) pair to the latent
/// space; the branch sees (latent, u_query); the trunk sees one coordinate.
struct ArchConfig {
    std::size_t grid_n = 100;
    std::vector<std::size_t> phi_hidden{400, 400};
    std::size_t latent_dim = 500;
    std::vector<std::size_t> branch_hidden{200, 400, 200};
    std::vector<std::size_t> trunk_hidden{200, 400, 200};
    std::size_t basis_dim = 150;

    void validate() const;
    ndmath::MlpSpec phi_spec() const;
    ndmath::MlpSpec branch_spec() const;
    ndmath::MlpSpec trunk_spec() const;

    friend bool operator==(const ArchConfig&, const ArchConfig&) = default;
};

struct ModelParams {
    ndmath::MlpParams phi;
    ndmath::MlpParams branch;
    ndmath::MlpParams trunk;
    double output_bias = 0.0;

    std::size_t parameter_count() const noexcept;
    ModelParams zeros_like() const;

    /// Canonical order: φ layers, branch layers, trunk layers (each W then b), output bias.
    std::vector<std::span<double>> blocks();
    std::vector<std::span<const double>> blocks() const;
    std::vector<std::string> block_names() const;

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

ModelParams init_params(const ArchConfig& arch, ndmath::Rng& rng);

/// Checks params against an architecture; throws ShapeError naming the sub-network.
void check_params(const ModelParams& params, const ArchConfig& arch);

/// Infers the architecture from parameter shapes.
ArchConfig arch_of(const ModelParams& params);

using Prompt = std::span<const FunctionPair>;

struct PredictionRequest {
    Prompt prompt;
    std::span<const double> u_query;
    double x_query = 0.0;
};

/// Mean of φ(u_i ++ G(u_i)) over the prompt. The sum runs over pairs in
/// lexicographic order of their values, so any permutation of the prompt
/// yields a bit-identical latent.
Vector encode_prompt(const ModelParams& params, Prompt prompt);

/// branch(latent ++ u_query) · trunk(x_query) + output_bias.
double forward(const ModelParams& params, const PredictionRequest& req);

/// Prediction at every point of `points`; latent and branch output are computed once.
Vector predict_function(const ModelParams& params, Prompt prompt, std::span<const double> u_query,
                        std::span<const double> points);
pdegen::GridFunction predict_function(const ModelParams& params, Prompt prompt, std::span<const double> u_query,
                                      const pdegen::Grid& grid);

struct LossAndGradients {
    double loss = 0.0;
    ModelParams grads;
};

/// Mean over instances and grid nodes of (prediction - query solution)^2,
/// with exact gradients. Prompts may differ in length between instances.
LossAndGradients loss_and_gradients(const ModelParams& params, std::span<const pdegen::OperatorInstance* const> batch,
                                    const pdegen::Grid& grid);
LossAndGradients loss_and_gradients(const ModelParams& params, std::span<const pdegen::OperatorInstance> batch,
                                    const pdegen::Grid& grid);

/// Loss only, through the same batched path.
double batch_loss(const ModelParams& params, std::span<const pdegen::OperatorInstance* const> batch,
                  const pdegen::Grid& grid);

} // namespace opicl::deeposets
