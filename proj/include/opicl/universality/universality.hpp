#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "opicl/ndmath/dense_matrix.hpp"
#include "opicl/pdegen/grid.hpp"
#include "opicl/pdegen/instance.hpp"

namespace opicl::universality {

using ndmath::Vector;
using Point = std::span<const double>;

/// ℓ∞ distance between two discretized functions.
double sup_distance(Point a, Point b);

struct DeltaNet {
    double delta = 0.0;
    std::vector<std::size_t> center_indices;
};

/// First-fit greedy: a candidate joins the net when it is at least `delta`
/// away from every center chosen so far. The result is δ-separated and every
/// candidate lies strictly within `delta` of some center.
DeltaNet greedy_delta_net(std::span<const Vector> candidates, double delta);

struct DeltaCReport {
    bool passed = false;
    /// max over x of |B(x, δ/2)| divided by min over y of |B(y, δ)| (open balls).
    double worst_ratio = 0.0;
    std::size_t max_half_count = 0;
    std::size_t min_full_count = 0;
    bool covering_failure = false;
    /// First probe whose δ-ball holds no point (valid when covering_failure).
    std::size_t uncovered_probe = 0;
    /// Size of a greedy δ/3 net over the probes.
    std::size_t third_cover_size = 0;
};

/// Checks |{p ∈ B(x, δ/2)}| < C·|{p ∈ B(y, δ)}| for all probe pairs (x, y).
/// Probes default to the points themselves.
DeltaCReport verify_delta_C(std::span<const Vector> points, double delta, double C,
                            std::span<const Vector> probes = {});

using BumpProfile = double (*)(double distance, double delta);

/// 1 on [0, δ], linear down to 0 at 2δ, 0 beyond.
double linear_bump(double distance, double delta);

struct PouBasis {
    std::vector<Vector> centers;
    double delta = 0.0;
    BumpProfile profile = &linear_bump;

    std::size_t size() const noexcept { return centers.size(); }
};

/// Centers: a greedy 2δ-net of `cloud`, so every cloud point has a positive bump.
PouBasis make_pou_basis(std::span<const Vector> cloud, double delta);

/// Unnormalized bump value of every center at `point`.
Vector bump_values(const PouBasis& basis, Point point);

/// Bumps divided by their sum; throws CoverError when every bump vanishes.
Vector pou_weights(const PouBasis& basis, Point point);

/// Averaged Φ outputs. Layout per center j: n weighted solution sums over the
/// y grid followed by the bump mass.
struct ContextEncoding {
    std::size_t num_centers = 0;
    std::size_t y_size = 0;
    std::size_t m = 0;
    Vector values;

    std::span<const double> sums(std::size_t j) const;
    double mass(std::size_t j) const;
};

/// (1/m) Σ_i (b_j(u_i) G(u_i)(y), b_j(u_i)) with pairs summed in lexicographic
/// order, so permuting the prompt gives a bit-identical encoding. Each pair's
/// parameter is u_i on the x grid and its solution is G(u_i) on the y grid.
ContextEncoding phi_average(std::span<const pdegen::FunctionPair> prompt, const PouBasis& basis);

struct ClusterAverages {
    std::vector<Vector> averages;
    std::vector<bool> active;

    std::size_t active_count() const;
};

/// Mass-weighted cluster means; centers with zero mass are flagged inactive.
ClusterAverages xi_normalize(const ContextEncoding& encoding);

/// Σ_j Ḡ_j(y) w_j(u_q). Throws InsufficientPromptError when a center with
/// positive weight is inactive, CoverError when u_q is outside the cover.
Vector rho_predict(Point u_query, const ClusterAverages& clusters, const PouBasis& basis);

/// Hat-function (piecewise-linear) interpolation of nodal values at y ∈ [0, 1].
double psi_reconstruct(std::span<const double> values_on_y, const pdegen::Grid& y_grid, double y);

/// Whole pipeline for one query: Ψ ∘ ρ ∘ ξ ∘ Φ at the points `ys`.
Vector construct_prediction(std::span<const pdegen::FunctionPair> prompt, const PouBasis& basis, Point u_query,
                            const pdegen::Grid& y_grid, std::span<const double> ys);

struct UniversalityConfig {
    std::size_t x_grid_n = 100;
    std::size_t y_grid_n = 100;
    double delta = 0.1;
    double C = 2.0;
    /// Rows whose sup error reaches this are flagged; 0 disables the flag.
    double epsilon_target = 0.0;

    void validate() const;
};

/// A·sin(2π f x + θ).
struct Sinusoid {
    double amplitude = 1.0;
    double frequency = 1.0;
    double phase = 0.0;

    double operator()(double x) const;
};

/// Every amplitude paired with `phases` equally spaced phases in [0, 2π).
std::vector<Sinusoid> sinusoid_cloud(std::span<const double> amplitudes, std::size_t phases, double frequency = 1.0);

using ExactOperator = std::function<double(const Sinusoid& u, double y)>;

struct OperatorFamily {
    std::string id;
    std::vector<ExactOperator> members;
};

/// G_c(u) = c·u.
OperatorFamily scaling_family(std::vector<double> factors);
/// G_b(u) = u + b.
OperatorFamily shift_family(std::vector<double> offsets);
/// G(u) = g for every u, with g(y) = cos(2πy) + y.
OperatorFamily constant_family();
/// Solution of w'' = u on [0, 1] with w(0) = u0, w(1) = u1.
OperatorFamily poisson_family(double u0, double u1);

struct SweepConfig {
    UniversalityConfig base;
    /// Points on [0, 1] where Ψ is compared against the exact operator.
    std::size_t eval_points = 397;
    /// Held-out queries per δ, taken evenly from the cloud points left out of the prompt.
    std::size_t max_queries = 64;
};

struct SweepRow {
    double delta = 0.0;
    std::string family_id;
    double sup_error = 0.0;
    double mean_error = 0.0;
    std::size_t active_centers = 0;
    double min_mass = 0.0;

    /// Error of Ψ applied to exact nodal values, over the same queries and points.
    double interpolation_error = 0.0;
    std::size_t prompt_size = 0;
    std::size_t num_centers = 0;
    std::size_t queries = 0;
    std::size_t cover_failures = 0;
    DeltaCReport verifier;
    /// min_mass ≥ 1/(C·t) with t the verifier's δ/3 cover size.
    bool denominator_bound_holds = false;
    /// Largest 1 − w_j(u_i) over prompt samples within δ of center j.
    double max_plateau_deviation = 0.0;
    bool meets_target = true;
};

/// For each δ: the prompt is a greedy δ-net of the cloud, the basis a greedy
/// 2δ-net, and queries are held-out cloud points. Queries that fall outside
/// the cover or need an inactive center count as cover failures.
std::vector<SweepRow> universality_error_sweep(const OperatorFamily& family, std::span<const Sinusoid> cloud,
                                               std::span<const double> deltas, const SweepConfig& cfg);

/// delta,family_id,sup_error,mean_error,active_centers,min_mass
void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepRow> rows);

} // namespace opicl::universality
