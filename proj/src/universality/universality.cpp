#include "opicl/universality/universality.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>

#include "opicl/errors.hpp"
#include "opicl/io/csv.hpp"
#include "opicl/ndmath/parallel.hpp"

namespace opicl::universality {

double sup_distance(Point a, Point b) {
    if (a.size() != b.size()) throw ShapeError("sup_distance: length mismatch");
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

DeltaNet greedy_delta_net(std::span<const Vector> candidates, double delta) {
    if (candidates.empty()) throw InvalidArgument("greedy_delta_net: no candidates");
    if (!(delta > 0.0)) throw InvalidArgument("greedy_delta_net: delta must be positive");
    DeltaNet net{delta, {}};
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const bool separated = std::all_of(net.center_indices.begin(), net.center_indices.end(), [&](std::size_t c) {
            return sup_distance(candidates[i], candidates[c]) >= delta;
        });
        if (separated) net.center_indices.push_back(i);
    }
    return net;
}

DeltaCReport verify_delta_C(std::span<const Vector> points, double delta, double C, std::span<const Vector> probes) {
    if (!(delta > 0.0)) throw InvalidArgument("verify_delta_C: delta must be positive");
    if (probes.empty()) probes = points;
    DeltaCReport r;
    if (probes.empty()) return r;

    std::vector<std::size_t> half(probes.size()), full(probes.size());
    ndmath::parallel_for(probes.size(), [&](std::size_t q) {
        std::size_t h = 0, f = 0;
        for (const auto& p : points) {
            const double d = sup_distance(probes[q], p);
            h += d < delta / 2;
            f += d < delta;
        }
        half[q] = h;
        full[q] = f;
    });

    r.max_half_count = *std::max_element(half.begin(), half.end());
    const auto min_it = std::min_element(full.begin(), full.end());
    r.min_full_count = *min_it;
    if (r.min_full_count == 0) {
        r.covering_failure = true;
        r.uncovered_probe = std::size_t(min_it - full.begin());
        r.worst_ratio = std::numeric_limits<double>::infinity();
        r.passed = false;
    } else {
        r.worst_ratio = double(r.max_half_count) / double(r.min_full_count);
        r.passed = double(r.max_half_count) < C * double(r.min_full_count);
    }
    r.third_cover_size = greedy_delta_net(probes, delta / 3).center_indices.size();
    return r;
}

double linear_bump(double distance, double delta) {
    if (distance <= delta) return 1.0;
    if (distance >= 2 * delta) return 0.0;
    return (2 * delta - distance) / delta;
}

PouBasis make_pou_basis(std::span<const Vector> cloud, double delta) {
    const DeltaNet net = greedy_delta_net(cloud, 2 * delta);
    PouBasis basis;
    basis.delta = delta;
    for (std::size_t i : net.center_indices) basis.centers.push_back(cloud[i]);
    return basis;
}

Vector bump_values(const PouBasis& basis, Point point) {
    Vector b(basis.size());
    for (std::size_t j = 0; j < basis.size(); ++j) {
        b[j] = basis.profile(sup_distance(point, basis.centers[j]), basis.delta);
    }
    return b;
}

Vector pou_weights(const PouBasis& basis, Point point) {
    Vector w = bump_values(basis, point);
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    if (!(total > 0.0)) throw CoverError("point lies at distance >= 2*delta from every center");
    for (double& v : w) v /= total;
    return w;
}

std::span<const double> ContextEncoding::sums(std::size_t j) const {
    return std::span<const double>(values).subspan(j * (y_size + 1), y_size);
}

double ContextEncoding::mass(std::size_t j) const { return values[j * (y_size + 1) + y_size]; }

ContextEncoding phi_average(std::span<const pdegen::FunctionPair> prompt, const PouBasis& basis) {
    if (prompt.empty()) throw InvalidArgument("phi_average: empty prompt");
    const std::size_t n = prompt.front().solution.size();
    for (const auto& p : prompt) {
        if (p.solution.size() != n) throw ShapeError("phi_average: solutions differ in length");
    }

    std::vector<std::size_t> order(prompt.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& pa = prompt[a];
        const auto& pb = prompt[b];
        if (pa.parameter.values != pb.parameter.values) return pa.parameter.values < pb.parameter.values;
        return pa.solution.values < pb.solution.values;
    });

    ContextEncoding enc;
    enc.num_centers = basis.size();
    enc.y_size = n;
    enc.m = prompt.size();
    enc.values.assign(enc.num_centers * (n + 1), 0.0);
    for (std::size_t i : order) {
        const Vector b = bump_values(basis, prompt[i].parameter.values);
        if (std::all_of(b.begin(), b.end(), [](double v) { return v == 0.0; })) {
            throw CoverError("prompt sample " + std::to_string(i) + " lies outside the cover");
        }
        for (std::size_t j = 0; j < b.size(); ++j) {
            if (b[j] == 0.0) continue;
            double* slot = enc.values.data() + j * (n + 1);
            for (std::size_t k = 0; k < n; ++k) slot[k] += b[j] * prompt[i].solution.values[k];
            slot[n] += b[j];
        }
    }
    const double inv_m = 1.0 / double(enc.m);
    for (double& v : enc.values) v *= inv_m;
    return enc;
}

std::size_t ClusterAverages::active_count() const { return std::size_t(std::count(active.begin(), active.end(), true)); }

ClusterAverages xi_normalize(const ContextEncoding& encoding) {
    ClusterAverages out;
    out.averages.resize(encoding.num_centers);
    out.active.resize(encoding.num_centers);
    for (std::size_t j = 0; j < encoding.num_centers; ++j) {
        const double mass = encoding.mass(j);
        const auto sums = encoding.sums(j);
        out.active[j] = mass > 0.0;
        out.averages[j].assign(encoding.y_size, 0.0);
        if (!out.active[j]) continue;
        for (std::size_t k = 0; k < encoding.y_size; ++k) out.averages[j][k] = sums[k] / mass;
    }
    return out;
}

Vector rho_predict(Point u_query, const ClusterAverages& clusters, const PouBasis& basis) {
    if (clusters.averages.size() != basis.size()) throw ShapeError("rho_predict: clusters do not match the basis");
    const Vector w = pou_weights(basis, u_query);
    const std::size_t n = basis.size() ? clusters.averages.front().size() : 0;
    Vector out(n, 0.0);
    for (std::size_t j = 0; j < w.size(); ++j) {
        if (w[j] == 0.0) continue;
        if (!clusters.active[j]) {
            throw InsufficientPromptError("center " + std::to_string(j) + " is needed by the query but has no prompt samples");
        }
        for (std::size_t k = 0; k < n; ++k) out[k] += w[j] * clusters.averages[j][k];
    }
    return out;
}

double psi_reconstruct(std::span<const double> values_on_y, const pdegen::Grid& y_grid, double y) {
    if (values_on_y.size() != y_grid.size()) throw ShapeError("psi_reconstruct: values do not match the grid");
    if (!(y >= 0.0 && y <= 1.0)) throw InvalidArgument("psi_reconstruct: query outside [0, 1]");
    const std::size_t n = y_grid.size();
    const double pos = y * double(n - 1);
    const double nearest = std::nearbyint(pos);
    if (std::abs(pos - nearest) <= 1e-12 * double(n - 1)) return values_on_y[std::size_t(nearest)];
    const std::size_t i = std::min(std::size_t(pos), n - 2);
    const double t = pos - double(i);
    return (1.0 - t) * values_on_y[i] + t * values_on_y[i + 1];
}

Vector construct_prediction(std::span<const pdegen::FunctionPair> prompt, const PouBasis& basis, Point u_query,
                            const pdegen::Grid& y_grid, std::span<const double> ys) {
    const ClusterAverages clusters = xi_normalize(phi_average(prompt, basis));
    const Vector on_y = rho_predict(u_query, clusters, basis);
    Vector out(ys.size());
    for (std::size_t i = 0; i < ys.size(); ++i) out[i] = psi_reconstruct(on_y, y_grid, ys[i]);
    return out;
}

void UniversalityConfig::validate() const {
    if (x_grid_n < 2 || y_grid_n < 2) throw InvalidArgument("grids need at least 2 points");
    if (!(delta > 0.0)) throw InvalidArgument("delta must be positive");
    if (!(C > 1.0)) throw InvalidArgument("C must exceed 1");
    if (!(epsilon_target >= 0.0)) throw InvalidArgument("epsilon_target must be non-negative");
}

double Sinusoid::operator()(double x) const {
    return amplitude * std::sin(2.0 * std::numbers::pi * frequency * x + phase);
}

std::vector<Sinusoid> sinusoid_cloud(std::span<const double> amplitudes, std::size_t phases, double frequency) {
    if (amplitudes.empty() || phases == 0) throw InvalidArgument("sinusoid_cloud: empty cloud");
    std::vector<Sinusoid> cloud;
    cloud.reserve(amplitudes.size() * phases);
    for (double a : amplitudes) {
        for (std::size_t p = 0; p < phases; ++p) {
            cloud.push_back({a, frequency, 2.0 * std::numbers::pi * double(p) / double(phases)});
        }
    }
    return cloud;
}

OperatorFamily scaling_family(std::vector<double> factors) {
    OperatorFamily f{"scaling", {}};
    for (double c : factors) f.members.push_back([c](const Sinusoid& u, double y) { return c * u(y); });
    return f;
}

OperatorFamily shift_family(std::vector<double> offsets) {
    OperatorFamily f{"shift", {}};
    for (double b : offsets) f.members.push_back([b](const Sinusoid& u, double y) { return u(y) + b; });
    return f;
}

OperatorFamily constant_family() {
    return {"constant", {[](const Sinusoid&, double y) { return std::cos(2.0 * std::numbers::pi * y) + y; }}};
}

OperatorFamily poisson_family(double u0, double u1) {
    return {"poisson", {[u0, u1](const Sinusoid& u, double y) {
                const double w = 2.0 * std::numbers::pi * u.frequency;
                const double s = u.amplitude / (w * w);
                const double alpha = u0 + s * std::sin(u.phase);
                const double beta = u1 - alpha + s * std::sin(w + u.phase);
                return -s * std::sin(w * y + u.phase) + alpha + beta * y;
            }}};
}

namespace {

struct QueryResult {
    bool failed = false;
    double sup = 0.0;
    double sum = 0.0;
    double interp = 0.0;
};

std::vector<double> eval_points(std::size_t count) {
    const pdegen::Grid g(count);
    return {g.points().begin(), g.points().end()};
}

} // namespace

std::vector<SweepRow> universality_error_sweep(const OperatorFamily& family, std::span<const Sinusoid> cloud,
                                               std::span<const double> deltas, const SweepConfig& cfg) {
    cfg.base.validate();
    if (family.members.empty()) throw InvalidArgument("operator family has no members");
    if (cloud.empty()) throw InvalidArgument("empty function cloud");
    if (cfg.max_queries == 0) throw InvalidArgument("max_queries must be positive");

    const pdegen::Grid x_grid(cfg.base.x_grid_n);
    const pdegen::Grid y_grid(cfg.base.y_grid_n);
    const std::vector<double> ys = eval_points(std::max<std::size_t>(cfg.eval_points, 2));

    std::vector<Vector> cloud_x(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        cloud_x[i].resize(x_grid.size());
        for (std::size_t k = 0; k < x_grid.size(); ++k) cloud_x[i][k] = cloud[i](x_grid[k]);
    }

    std::vector<SweepRow> rows;
    for (double delta : deltas) {
        if (!(delta > 0.0)) throw InvalidArgument("deltas must be positive");
        SweepRow row;
        row.delta = delta;
        row.family_id = family.id;

        const DeltaNet net = greedy_delta_net(cloud_x, delta);
        std::vector<bool> in_prompt(cloud.size(), false);
        std::vector<Vector> prompt_x;
        for (std::size_t i : net.center_indices) {
            in_prompt[i] = true;
            prompt_x.push_back(cloud_x[i]);
        }
        std::vector<std::size_t> held;
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            if (!in_prompt[i]) held.push_back(i);
        }
        if (held.empty()) {
            throw InvalidArgument("delta " + io::format_double(delta) + " leaves no held-out queries in the cloud");
        }
        const std::size_t stride = (held.size() + cfg.max_queries - 1) / cfg.max_queries;
        std::vector<std::size_t> queries;
        for (std::size_t k = 0; k < held.size(); k += stride) queries.push_back(held[k]);

        const PouBasis basis = make_pou_basis(cloud_x, delta);
        row.prompt_size = prompt_x.size();
        row.num_centers = basis.size();
        row.queries = queries.size();
        row.verifier = verify_delta_C(prompt_x, delta, cfg.base.C, cloud_x);

        for (const auto& u : prompt_x) {
            const Vector w = pou_weights(basis, u);
            for (std::size_t j = 0; j < basis.size(); ++j) {
                if (sup_distance(u, basis.centers[j]) <= delta) {
                    row.max_plateau_deviation = std::max(row.max_plateau_deviation, 1.0 - w[j]);
                }
            }
        }

        std::vector<QueryResult> results(queries.size() * family.members.size());
        for (std::size_t g = 0; g < family.members.size(); ++g) {
            const ExactOperator& op = family.members[g];
            std::vector<pdegen::FunctionPair> prompt;
            for (std::size_t i : net.center_indices) {
                pdegen::FunctionPair p;
                p.parameter.values = cloud_x[i];
                p.solution.values.resize(y_grid.size());
                for (std::size_t k = 0; k < y_grid.size(); ++k) p.solution.values[k] = op(cloud[i], y_grid[k]);
                prompt.push_back(std::move(p));
            }
            const ContextEncoding enc = phi_average(prompt, basis);
            const ClusterAverages clusters = xi_normalize(enc);
            if (g == 0) {
                row.active_centers = clusters.active_count();
                row.min_mass = std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j < basis.size(); ++j) {
                    if (clusters.active[j]) row.min_mass = std::min(row.min_mass, enc.mass(j));
                }
            }

            ndmath::parallel_for(queries.size(), [&](std::size_t q) {
                QueryResult& r = results[g * queries.size() + q];
                const Sinusoid& u = cloud[queries[q]];
                Vector on_y;
                try {
                    on_y = rho_predict(cloud_x[queries[q]], clusters, basis);
                } catch (const CoverError&) {
                    r.failed = true;
                    return;
                } catch (const InsufficientPromptError&) {
                    r.failed = true;
                    return;
                }
                Vector exact_nodes(y_grid.size());
                for (std::size_t k = 0; k < y_grid.size(); ++k) exact_nodes[k] = op(u, y_grid[k]);
                for (double y : ys) {
                    const double exact = op(u, y);
                    const double err = std::abs(psi_reconstruct(on_y, y_grid, y) - exact);
                    r.sup = std::max(r.sup, err);
                    r.sum += err;
                    r.interp = std::max(r.interp, std::abs(psi_reconstruct(exact_nodes, y_grid, y) - exact));
                }
            });
        }

        double total = 0.0;
        std::size_t counted = 0;
        for (std::size_t q = 0; q < queries.size(); ++q) {
            if (results[q].failed) ++row.cover_failures;
        }
        for (const auto& r : results) {
            if (r.failed) continue;
            row.sup_error = std::max(row.sup_error, r.sup);
            row.interpolation_error = std::max(row.interpolation_error, r.interp);
            total += r.sum;
            ++counted;
        }
        row.mean_error = counted ? total / double(counted * ys.size()) : std::numeric_limits<double>::quiet_NaN();
        if (!counted) row.sup_error = std::numeric_limits<double>::quiet_NaN();
        const double t = double(row.verifier.third_cover_size);
        row.denominator_bound_holds = row.active_centers > 0 && row.min_mass >= 1.0 / (cfg.base.C * t);
        row.meets_target = cfg.base.epsilon_target == 0.0 || row.sup_error < cfg.base.epsilon_target;
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepRow> rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << "delta,family_id,sup_error,mean_error,active_centers,min_mass\n";
    for (const auto& r : rows) {
        out << io::format_double(r.delta) << ',' << r.family_id << ',' << io::format_double(r.sup_error) << ','
            << io::format_double(r.mean_error) << ',' << r.active_centers << ',' << io::format_double(r.min_mass)
            << '\n';
    }
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

} // namespace opicl::universality
