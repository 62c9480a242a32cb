#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "opicl/ndmath/rng.hpp"
#include "opicl/pdegen/gp.hpp"
#include "opicl/pdegen/grid.hpp"
#include "opicl/pdegen/solvers.hpp"

namespace opicl::pdegen {

enum class Pde { poisson, reaction_diffusion };
enum class Direction { forward, inverse };

struct ProblemFamily {
    Pde pde = Pde::poisson;
    Direction direction = Direction::forward;

    /// "poisson-forward", "reaction_diffusion-inverse", ...
    std::string name() const;
    static ProblemFamily parse(std::string_view name);
    static std::vector<ProblemFamily> all();

    friend bool operator==(const ProblemFamily&, const ProblemFamily&) = default;
    friend auto operator<=>(const ProblemFamily&, const ProblemFamily&) = default;
};

std::string_view to_string(Pde pde);
std::string_view to_string(Direction direction);
Pde parse_pde(std::string_view s);
Direction parse_direction(std::string_view s);

/// One prompt entry: the model input ("parameter") and target ("solution").
/// For inverse problems these are the PDE solution and the PDE parameter respectively.
struct FunctionPair {
    GridFunction parameter;
    GridFunction solution;

    friend bool operator==(const FunctionPair&, const FunctionPair&) = default;
};

struct OperatorInstance {
    ProblemFamily family;
    OperatorCoefficients coeffs;
    std::vector<FunctionPair> prompt;
    FunctionPair query;

    friend bool operator==(const OperatorInstance&, const OperatorInstance&) = default;
};

struct GenConfig {
    std::size_t grid_n = 100;
    std::size_t prompt_size = 4;
    GpConfig gp;
    ReactionDiffusionOptions reaction_diffusion{-1.0, 10.0};
    /// Resamples allowed per GP function when a reaction-diffusion solve is singular.
    std::size_t max_retries = 20;
    /// 0: fresh GP draws for every instance. Otherwise each family draws from a
    /// fixed pool of this many GP functions.
    std::size_t parameter_pool = 0;

    void validate() const;
};

/// Precomputed pieces shared by every instance of one generation run.
class InstanceFactory {
public:
    explicit InstanceFactory(GenConfig cfg);

    const GenConfig& config() const noexcept { return cfg_; }
    const Grid& grid() const noexcept { return grid_; }
    const ndmath::DenseMatrix& cholesky() const noexcept { return chol_; }

    OperatorCoefficients sample_coefficients(Pde pde, ndmath::Rng& rng) const;

    /// Solution of the PDE for one GP parameter sample; throws SingularSystemError.
    GridFunction solve(Pde pde, const GridFunction& parameter, const OperatorCoefficients& coeffs) const;

    /// Samples coefficients and m+1 pairs sharing them. Inverse problems are
    /// produced by a forward solve followed by swapping the pair's roles.
    /// With a non-empty `pool`, parameter functions are drawn without
    /// replacement from it instead of from the GP.
    OperatorInstance build(ProblemFamily family, ndmath::Rng& rng, std::span<const GridFunction> pool = {}) const;

    /// m+1 pairs for fixed coefficients (used to build several prompts for one operator).
    std::vector<FunctionPair> sample_pairs(ProblemFamily family, const OperatorCoefficients& coeffs,
                                           std::size_t count, ndmath::Rng& rng,
                                           std::span<const GridFunction> pool = {}) const;

    /// Forward-problem target for a model input under the given coefficients.
    GridFunction exact_target(ProblemFamily family, const OperatorCoefficients& coeffs,
                              const GridFunction& model_input) const;

private:
    GenConfig cfg_;
    Grid grid_;
    ndmath::DenseMatrix chol_;
};

OperatorInstance build_operator_instance(ProblemFamily family, const GenConfig& cfg, ndmath::Rng& rng);

struct GenerationInfo {
    std::uint64_t seed = 0;
    std::size_t per_family = 0;
    std::vector<ProblemFamily> families;
    GenConfig config;
};

struct Dataset {
    std::size_t grid_n = 0;
    std::vector<OperatorInstance> instances;
    std::optional<GenerationInfo> generation;

    bool empty() const noexcept { return instances.empty(); }
};

/// Instance j (family-major order) uses Rng(seed, j); built in parallel and
/// stored in index order.
Dataset generate_dataset(const GenConfig& cfg, std::span<const ProblemFamily> families, std::size_t per_family,
                         std::uint64_t seed);

} // namespace opicl::pdegen
