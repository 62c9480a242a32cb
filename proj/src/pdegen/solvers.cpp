#include "opicl/pdegen/solvers.hpp"

#include <cmath>
#include <string>

#include "opicl/errors.hpp"
#include "opicl/ndmath/dense_matrix.hpp"

namespace opicl::pdegen {

namespace {

constexpr double kMinPivot = 1e-14;

void check_grid_function(const Grid& grid, const GridFunction& f, const char* who) {
    if (f.size() != grid.size()) {
        throw ShapeError(std::string(who) + ": function has " + std::to_string(f.size()) + " values but grid has " +
                         std::to_string(grid.size()) + " points");
    }
    if (!ndmath::all_finite(f.values)) throw NumericError(std::string(who) + ": non-finite input values");
}

/// Interior tridiagonal solve with Dirichlet data folded into the right-hand side.
/// Row i (interior node i+1): off * (u_{i} + u_{i+2}) + diag[i] * u_{i+1} = rhs[i].
GridFunction solve_dirichlet(std::size_t n, double off, std::vector<double> diag, std::vector<double> rhs, double u0,
                             double u1) {
    GridFunction u;
    u.values.assign(n, 0.0);
    u.values.front() = u0;
    u.values.back() = u1;
    if (n <= 2) return u;
    const std::size_t m = n - 2;
    rhs.front() -= off * u0;
    rhs.back() -= off * u1;
    const std::vector<double> band(m - 1, off);
    const std::vector<double> inner = solve_tridiagonal(band, diag, band, rhs);
    for (std::size_t i = 0; i < m; ++i) u.values[i + 1] = inner[i];
    return u;
}

} // namespace

std::vector<double> solve_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                                      std::span<const double> upper, std::span<const double> rhs) {
    const std::size_t n = diag.size();
    if (n == 0) throw ShapeError("solve_tridiagonal: empty system");
    if (rhs.size() != n || lower.size() != n - 1 || upper.size() != n - 1) {
        throw ShapeError("solve_tridiagonal: expected diag/rhs of length n and off-diagonals of length n-1");
    }
    std::vector<double> c(n, 0.0);
    std::vector<double> x(n, 0.0);
    double pivot = diag[0];
    if (!(std::abs(pivot) >= kMinPivot)) throw SingularSystemError("solve_tridiagonal: zero pivot at row 0", 0);
    if (n > 1) c[0] = upper[0] / pivot;
    x[0] = rhs[0] / pivot;
    for (std::size_t i = 1; i < n; ++i) {
        pivot = diag[i] - lower[i - 1] * c[i - 1];
        if (!(std::abs(pivot) >= kMinPivot)) {
            throw SingularSystemError("solve_tridiagonal: zero pivot at row " + std::to_string(i), i);
        }
        if (i + 1 < n) c[i] = upper[i] / pivot;
        x[i] = (rhs[i] - lower[i - 1] * x[i - 1]) / pivot;
    }
    for (std::size_t i = n - 1; i-- > 0;) x[i] -= c[i] * x[i + 1];
    return x;
}

GridFunction solve_poisson(const Grid& grid, const GridFunction& f, double u0, double u1) {
    check_grid_function(grid, f, "solve_poisson");
    if (!std::isfinite(u0) || !std::isfinite(u1)) throw NumericError("solve_poisson: non-finite boundary values");
    const std::size_t n = grid.size();
    if (n <= 2) return solve_dirichlet(n, 1.0, {}, {}, u0, u1);
    const double h2 = grid.spacing() * grid.spacing();
    std::vector<double> diag(n - 2, -2.0);
    std::vector<double> rhs(n - 2);
    for (std::size_t i = 0; i < n - 2; ++i) rhs[i] = h2 * f.values[i + 1];
    return solve_dirichlet(n, 1.0, std::move(diag), std::move(rhs), u0, u1);
}

GridFunction solve_reaction_diffusion_rhs(const Grid& grid, const GridFunction& k, double a,
                                          std::span<const double> rhs_values, double u0, double u1,
                                          const ReactionDiffusionOptions& options) {
    check_grid_function(grid, k, "solve_reaction_diffusion");
    if (a == 0.0 || !std::isfinite(a)) throw InvalidArgument("solve_reaction_diffusion: diffusion a must be nonzero");
    if (options.sign != 1.0 && options.sign != -1.0) {
        throw InvalidArgument("solve_reaction_diffusion: sign must be +1 or -1");
    }
    if (rhs_values.size() != grid.size()) throw ShapeError("solve_reaction_diffusion: rhs length mismatch");
    const std::size_t n = grid.size();
    const double h2 = grid.spacing() * grid.spacing();
    const double off = options.sign * a;
    std::vector<double> diag(n > 2 ? n - 2 : 0);
    std::vector<double> rhs(diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) {
        diag[i] = -2.0 * off + h2 * k.values[i + 1];
        rhs[i] = h2 * rhs_values[i + 1];
    }
    GridFunction u = solve_dirichlet(n, off, std::move(diag), std::move(rhs), u0, u1);
    if (!ndmath::all_finite(u.values)) throw SingularSystemError("solve_reaction_diffusion: non-finite solution", 0);
    if (options.max_abs_solution > 0.0 && ndmath::max_abs(u.values) > options.max_abs_solution) {
        throw SingularSystemError("solve_reaction_diffusion: near-resonant system (max |u| = " +
                                      std::to_string(ndmath::max_abs(u.values)) + ")",
                                  0);
    }
    return u;
}

GridFunction solve_reaction_diffusion(const Grid& grid, const GridFunction& k, const OperatorCoefficients& coeffs,
                                      const ReactionDiffusionOptions& options) {
    const std::vector<double> rhs(grid.size(), coeffs.c);
    return solve_reaction_diffusion_rhs(grid, k, coeffs.a, rhs, coeffs.u0, coeffs.u1, options);
}

} // namespace opicl::pdegen
