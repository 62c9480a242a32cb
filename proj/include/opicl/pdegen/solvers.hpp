#pragma once

#include <span>
#include <vector>

#include "opicl/pdegen/grid.hpp"

namespace opicl::pdegen {

/// Thomas algorithm. `lower[i]` multiplies x[i] in row i+1 and `upper[i]`
/// multiplies x[i+1] in row i, so both have length n-1.
/// Throws SingularSystemError when a pivot magnitude drops below 1e-14.
std::vector<double> solve_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                                      std::span<const double> upper, std::span<const double> rhs);

/// u'' = f on the grid interior with u(0) = u0, u(1) = u1 (three-point stencil).
GridFunction solve_poisson(const Grid& grid, const GridFunction& f, double u0, double u1);

struct OperatorCoefficients {
    double a = 0.0;  // diffusion (reaction-diffusion only)
    double c = 0.0;  // source constant (reaction-diffusion only)
    double u0 = 0.0; // u(0)
    double u1 = 0.0; // u(1)

    friend bool operator==(const OperatorCoefficients&, const OperatorCoefficients&) = default;
};

struct ReactionDiffusionOptions {
    /// s in  s*a*u'' + k*u = c.  -1 gives the coercive form -a u'' + k u = c.
    double sign = -1.0;
    /// Solutions with max |u| above this are treated as near-resonant. 0 disables the guard.
    double max_abs_solution = 0.0;
};

/// sign*a*u'' + k(x)*u = c with Dirichlet ends. Throws SingularSystemError for
/// singular or (with the guard enabled) near-resonant systems.
GridFunction solve_reaction_diffusion(const Grid& grid, const GridFunction& k, const OperatorCoefficients& coeffs,
                                      const ReactionDiffusionOptions& options = {});

/// Same discretization with a pointwise right-hand side instead of the constant c.
GridFunction solve_reaction_diffusion_rhs(const Grid& grid, const GridFunction& k, double a,
                                          std::span<const double> rhs, double u0, double u1,
                                          const ReactionDiffusionOptions& options = {});

} // namespace opicl::pdegen
