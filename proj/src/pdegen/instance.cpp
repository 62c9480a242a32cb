#include "opicl/pdegen/instance.hpp"

#include <algorithm>
#include <string>

#include "opicl/errors.hpp"
#include "opicl/ndmath/parallel.hpp"

namespace opicl::pdegen {

std::string_view to_string(Pde pde) {
    return pde == Pde::poisson ? "poisson" : "reaction_diffusion";
}

std::string_view to_string(Direction direction) {
    return direction == Direction::forward ? "forward" : "inverse";
}

Pde parse_pde(std::string_view s) {
    if (s == "poisson") return Pde::poisson;
    if (s == "reaction_diffusion" || s == "reaction-diffusion") return Pde::reaction_diffusion;
    throw InvalidArgument("unknown PDE '" + std::string(s) + "'");
}

Direction parse_direction(std::string_view s) {
    if (s == "forward") return Direction::forward;
    if (s == "inverse") return Direction::inverse;
    throw InvalidArgument("unknown direction '" + std::string(s) + "'");
}

std::string ProblemFamily::name() const {
    return std::string(to_string(pde)) + "-" + std::string(to_string(direction));
}

ProblemFamily ProblemFamily::parse(std::string_view name) {
    const auto dash = name.rfind('-');
    if (dash == std::string_view::npos) throw InvalidArgument("problem family '" + std::string(name) + "' lacks a direction");
    return {parse_pde(name.substr(0, dash)), parse_direction(name.substr(dash + 1))};
}

std::vector<ProblemFamily> ProblemFamily::all() {
    return {{Pde::poisson, Direction::forward},
            {Pde::poisson, Direction::inverse},
            {Pde::reaction_diffusion, Direction::forward},
            {Pde::reaction_diffusion, Direction::inverse}};
}

void GenConfig::validate() const {
    if (grid_n < 2) throw InvalidArgument("GenConfig: grid_n must be at least 2");
    if (prompt_size < 1) throw InvalidArgument("GenConfig: prompt_size must be at least 1");
    gp.validate();
}

InstanceFactory::InstanceFactory(GenConfig cfg)
    : cfg_(std::move(cfg)), grid_(cfg_.grid_n), chol_(gp_cholesky(grid_, cfg_.gp)) {
    cfg_.validate();
}

OperatorCoefficients InstanceFactory::sample_coefficients(Pde pde, ndmath::Rng& rng) const {
    OperatorCoefficients c;
    c.u0 = rng.uniform(-1.0, 1.0);
    c.u1 = rng.uniform(-1.0, 1.0);
    if (pde == Pde::reaction_diffusion) {
        c.a = rng.uniform(0.025, 0.075);
        c.c = rng.uniform(-2.0, 2.0);
    }
    return c;
}

GridFunction InstanceFactory::solve(Pde pde, const GridFunction& parameter, const OperatorCoefficients& coeffs) const {
    if (pde == Pde::poisson) return solve_poisson(grid_, parameter, coeffs.u0, coeffs.u1);
    return solve_reaction_diffusion(grid_, parameter, coeffs, cfg_.reaction_diffusion);
}

std::vector<FunctionPair> InstanceFactory::sample_pairs(ProblemFamily family, const OperatorCoefficients& coeffs,
                                                        std::size_t count, ndmath::Rng& rng,
                                                        std::span<const GridFunction> pool) const {
    std::vector<FunctionPair> pairs;
    pairs.reserve(count);
    std::vector<std::size_t> unused(pool.size());
    for (std::size_t i = 0; i < unused.size(); ++i) unused[i] = i;

    for (std::size_t p = 0; p < count; ++p) {
        std::size_t attempt = 0;
        for (;;) {
            GridFunction parameter;
            if (pool.empty()) {
                parameter = sample_gp_function(chol_, grid_, rng);
            } else {
                if (unused.empty()) throw InvalidArgument("parameter pool exhausted while building an instance");
                const std::size_t pick = rng.uniform_index(unused.size());
                parameter = pool[unused[pick]];
                unused.erase(unused.begin() + std::ptrdiff_t(pick));
            }
            try {
                GridFunction solution = solve(family.pde, parameter, coeffs);
                if (family.direction == Direction::forward) {
                    pairs.push_back({std::move(parameter), std::move(solution)});
                } else {
                    pairs.push_back({std::move(solution), std::move(parameter)});
                }
                break;
            } catch (const SingularSystemError&) {
                if (++attempt > cfg_.max_retries) throw;
            }
        }
    }
    return pairs;
}

OperatorInstance InstanceFactory::build(ProblemFamily family, ndmath::Rng& rng,
                                        std::span<const GridFunction> pool) const {
    OperatorInstance inst;
    inst.family = family;
    inst.coeffs = sample_coefficients(family.pde, rng);
    std::vector<FunctionPair> pairs = sample_pairs(family, inst.coeffs, cfg_.prompt_size + 1, rng, pool);
    inst.query = std::move(pairs.back());
    pairs.pop_back();
    inst.prompt = std::move(pairs);
    return inst;
}

GridFunction InstanceFactory::exact_target(ProblemFamily family, const OperatorCoefficients& coeffs,
                                           const GridFunction& model_input) const {
    if (model_input.size() != grid_.size()) throw ShapeError("exact_target: input length does not match the grid");
    if (family.direction == Direction::inverse) {
        throw InvalidArgument("exact_target: inverse targets are only known for generated pairs");
    }
    return solve(family.pde, model_input, coeffs);
}

OperatorInstance build_operator_instance(ProblemFamily family, const GenConfig& cfg, ndmath::Rng& rng) {
    return InstanceFactory(cfg).build(family, rng);
}

Dataset generate_dataset(const GenConfig& cfg, std::span<const ProblemFamily> families, std::size_t per_family,
                         std::uint64_t seed) {
    const InstanceFactory factory(cfg);
    Dataset ds;
    ds.grid_n = cfg.grid_n;
    ds.generation = GenerationInfo{seed, per_family, {families.begin(), families.end()}, cfg};

    // Parameter pools live on a stream range disjoint from instance streams.
    constexpr std::uint64_t kPoolStreamBase = 0x1000'0000'0000ULL;
    std::vector<std::vector<GridFunction>> pools(families.size());
    if (cfg.parameter_pool > 0) {
        for (std::size_t f = 0; f < families.size(); ++f) {
            ndmath::Rng rng(seed, kPoolStreamBase + f);
            for (std::size_t i = 0; i < cfg.parameter_pool; ++i)
                pools[f].push_back(sample_gp_function(factory.cholesky(), factory.grid(), rng));
        }
    }

    ds.instances.resize(families.size() * per_family);
    ndmath::parallel_for(ds.instances.size(), [&](std::size_t j) {
        const std::size_t f = j / per_family;
        ndmath::Rng rng(seed, j);
        ds.instances[j] = factory.build(families[f], rng, pools[f]);
    });
    return ds;
}

} // namespace opicl::pdegen
