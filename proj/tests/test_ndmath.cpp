#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "opicl/errors.hpp"
#include "opicl/ndmath/adam.hpp"
#include "opicl/ndmath/cholesky.hpp"
#include "opicl/ndmath/mlp.hpp"
#include "opicl/ndmath/parallel.hpp"
#include "opicl/ndmath/rng.hpp"
#include "opicl/pdegen/gp.hpp"
#include "support/test_support.hpp"

using namespace opicl;
using namespace opicl::ndmath;

namespace {

MlpParams random_mlp(std::vector<std::size_t> widths, std::uint64_t seed) {
    Rng rng(seed, 1);
    MlpParams p = init_mlp({widths}, rng);
    for (auto& b : p.biases) {
        for (double& v : b) v = rng.uniform(-0.5, 0.5);
    }
    return p;
}

Vector random_vector(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Vector v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

/// Affine/ReLU chain written out directly, without the tape machinery.
Vector straight_line(const MlpParams& p, const Vector& input) {
    Vector a = input;
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        const auto& W = p.weights[l];
        Vector z(W.rows());
        for (std::size_t r = 0; r < W.rows(); ++r) {
            double s = p.biases[l][r];
            for (std::size_t c = 0; c < W.cols(); ++c) s += W(r, c) * a[c];
            z[r] = (l + 1 < p.weights.size()) ? std::max(s, 0.0) : s;
        }
        a = std::move(z);
    }
    return a;
}

/// Gradient check of ⟨g, mlp(x)⟩ over all parameters and the input.
testing::GradCheckResult mlp_gradcheck(std::vector<std::size_t> widths, std::uint64_t seed, double tol) {
    MlpParams p = random_mlp(widths, seed);
    Rng rng(seed, 2);
    Vector x = random_vector(widths.front(), rng);
    const Vector g = random_vector(widths.back(), rng);
    auto fwd = mlp_forward(p, x);
    const auto back = mlp_backward(p, fwd.tape, g);

    auto loss = [&] { return dot(g, straight_line(p, x)); };
    auto params = p.blocks();
    auto grads = back.param_grads.blocks();
    std::vector<std::span<double>> all(params.begin(), params.end());
    std::vector<std::span<const double>> all_grads(grads.begin(), grads.end());
    all.push_back(x);
    all_grads.push_back(back.input_grad);
    return testing::check_gradient(all, all_grads, loss, 1e-6, tol);
}

} // namespace

TEST_CASE("dense matrix products match naive loops") {
    Rng rng(11, 0);
    DenseMatrix a(4, 3), b(3, 5);
    for (double& v : a.flat()) v = rng.uniform(-1, 1);
    for (double& v : b.flat()) v = rng.uniform(-1, 1);
    const DenseMatrix c = matmul(a, b);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 5; ++j) {
            double s = 0;
            for (std::size_t k = 0; k < 3; ++k) s += a(i, k) * b(k, j);
            CHECK(c(i, j) == doctest::Approx(s).epsilon(1e-14));
        }
    }
    const Vector x{1.0, -2.0, 0.5};
    const Vector y = matvec(a, x);
    for (std::size_t i = 0; i < 4; ++i) CHECK(y[i] == doctest::Approx(a(i, 0) - 2 * a(i, 1) + 0.5 * a(i, 2)));
    CHECK(a.transpose().transpose() == a);
    CHECK_THROWS_AS(matmul(a, a), ShapeError);
    CHECK_THROWS_AS(DenseMatrix(2, 2, Vector{1.0}), ShapeError);
}

TEST_CASE("rng draws are a pure function of seed, stream and position") {
    Rng a(5, 9), b(5, 9);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng resumed(5, 9, a.position());
    CHECK(resumed.next_u64() == a.next_u64());
    Rng other(5, 10);
    CHECK(Rng(5, 9).next_u64() != other.next_u64());
    Rng u(1, 1);
    for (int i = 0; i < 1000; ++i) {
        const double v = u.uniform();
        CHECK((v >= 0.0 && v < 1.0));
        const auto k = u.uniform_index(7);
        CHECK(k < 7);
    }
}

TEST_CASE("gaussian_vector determinism and moments") {
    Rng a(3, 4), b(3, 4), c(3, 5);
    const Vector va = gaussian_vector(a, 1001);
    CHECK(va == gaussian_vector(b, 1001));
    CHECK(va != gaussian_vector(c, 1001));

    Rng big(42, 0);
    const Vector v = gaussian_vector(big, 1'000'000);
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
    double var = 0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= double(v.size() - 1);
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(var - 1.0) < 0.01);
}

TEST_CASE("mlp_forward examples") {
    SUBCASE("identity network") {
        MlpParams p{{DenseMatrix::identity(2)}, {Vector{0, 0}}};
        CHECK(mlp_forward(p, Vector{1, -1}).output == Vector{1, -1});
    }
    SUBCASE("relu kills a negative preactivation") {
        MlpParams p{{DenseMatrix(1, 1, -1.0), DenseMatrix(1, 1, 1.0)}, {Vector{0}, Vector{0}}};
        const auto r = mlp_forward(p, Vector{3});
        CHECK(r.tape.activations[1][0] == 0.0);
        CHECK(r.output[0] == 0.0);
    }
    SUBCASE("matches a straight-line re-evaluation") {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const MlpParams p = random_mlp({2, 3, 1}, seed);
            Rng rng(seed, 7);
            const Vector x = random_vector(2, rng);
            const Vector out = mlp_forward(p, x).output;
            CHECK(std::abs(out[0] - straight_line(p, x)[0]) <= 1e-12);
            CHECK(mlp_eval(p, x) == out);
        }
    }
    SUBCASE("shape errors name the layer") {
        const MlpParams p = random_mlp({3, 4, 2}, 1);
        try {
            (void)mlp_forward(p, Vector{1, 2});
            FAIL("expected ShapeError");
        } catch (const ShapeError& e) {
            CHECK(std::string(e.what()).find("layer 0") != std::string::npos);
        }
        MlpParams bad = p;
        bad.biases[1].push_back(0.0);
        try {
            bad.validate();
            FAIL("expected ShapeError");
        } catch (const ShapeError& e) {
            CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
        }
    }
}

TEST_CASE("mlp_backward examples") {
    SUBCASE("linear layer calculus") {
        MlpParams p{{DenseMatrix(1, 1, 1.0)}, {Vector{0}}};
        const auto f = mlp_forward(p, Vector{2.5});
        const auto g = mlp_backward(p, f.tape, Vector{1});
        CHECK(g.param_grads.weights[0](0, 0) == 2.5);
        CHECK(g.param_grads.biases[0][0] == 1.0);
        CHECK(g.input_grad[0] == 1.0);
    }
    SUBCASE("dead network has zero input gradient") {
        MlpParams p = random_mlp({3, 4, 2}, 2);
        for (auto& b : p.biases[0]) b = -100.0;
        const auto f = mlp_forward(p, Vector{0.1, 0.2, 0.3});
        const auto g = mlp_backward(p, f.tape, Vector{1, 1});
        CHECK(g.input_grad == Vector{0, 0, 0});
    }
    SUBCASE("stale tape is rejected") {
        const MlpParams p = random_mlp({3, 4, 2}, 2);
        const MlpParams q = random_mlp({3, 5, 2}, 2);
        const auto f = mlp_forward(q, Vector{0.1, 0.2, 0.3});
        CHECK_THROWS_AS(mlp_backward(p, f.tape, Vector{1, 1}), ShapeError);
    }
    SUBCASE("[3,4,2] finite differences") {
        const auto r = mlp_gradcheck({3, 4, 2}, 17, 1e-6);
        CHECK(r.failed == 0);
        CHECK(r.checked == 3 * 4 + 4 + 4 * 2 + 2 + 3);
    }
}

TEST_CASE("gradient property: random specs up to (8,8,8)") {
    Rng shapes(99, 0);
    std::size_t total = 0;
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        std::vector<std::size_t> widths(2 + shapes.uniform_index(2));
        for (auto& w : widths) w = 1 + shapes.uniform_index(8);
        const auto r = mlp_gradcheck(widths, 100 + trial, 1e-6);
        CHECK_MESSAGE(r.failed == 0, "trial " << trial << " worst " << r.worst);
        total += r.checked;
    }
    CHECK(total > 0);
}

TEST_CASE("batched path agrees with the vector path") {
    const MlpParams p = random_mlp({4, 6, 5, 3}, 8);
    Rng rng(8, 3);
    DenseMatrix x(5, 4), g(5, 3);
    for (double& v : x.flat()) v = rng.uniform(-1, 1);
    for (double& v : g.flat()) v = rng.uniform(-1, 1);
    MlpBatchTape tape;
    const DenseMatrix out = mlp_forward_batch(p, x, &tape);
    MlpParams grads = p.zeros_like();
    DenseMatrix input_grad;
    mlp_backward_batch(p, tape, g, grads, &input_grad);

    MlpParams expect = p.zeros_like();
    for (std::size_t r = 0; r < 5; ++r) {
        const auto f = mlp_forward(p, x.row(r));
        for (std::size_t k = 0; k < 3; ++k) CHECK(out(r, k) == doctest::Approx(f.output[k]).epsilon(1e-13));
        const auto b = mlp_backward(p, f.tape, g.row(r));
        for (std::size_t k = 0; k < 4; ++k) {
            CHECK(input_grad(r, k) == doctest::Approx(b.input_grad[k]).epsilon(1e-12));
        }
        auto eb = expect.blocks();
        const auto bb = std::as_const(b.param_grads).blocks();
        for (std::size_t i = 0; i < eb.size(); ++i) {
            for (std::size_t j = 0; j < eb[i].size(); ++j) eb[i][j] += bb[i][j];
        }
    }
    const auto gb = std::as_const(grads).blocks();
    const auto eb = std::as_const(expect).blocks();
    for (std::size_t i = 0; i < gb.size(); ++i) {
        for (std::size_t j = 0; j < gb[i].size(); ++j) CHECK(gb[i][j] == doctest::Approx(eb[i][j]).epsilon(1e-12));
    }
}

TEST_CASE("init_mlp follows the Glorot-uniform policy") {
    Rng rng(1, 1);
    const MlpParams p = init_mlp({{200, 400, 3}}, rng);
    CHECK(p.parameter_count() == 200 * 400 + 400 + 400 * 3 + 3);
    const double bound0 = std::sqrt(6.0 / 600.0);
    CHECK(p.weights[0].max_abs() <= bound0);
    CHECK(p.weights[0].max_abs() > 0.9 * bound0);
    for (const auto& b : p.biases) CHECK(std::all_of(b.begin(), b.end(), [](double v) { return v == 0.0; }));
    CHECK_THROWS_AS(MlpSpec{{3}}.validate(), ShapeError);
    CHECK_THROWS_AS((MlpSpec{{3, 0, 1}}.validate()), ShapeError);
}

TEST_CASE("adam_step examples") {
    SUBCASE("first step from zero") {
        Vector p{0.0}, g{1.0};
        std::vector<std::span<double>> ps{p};
        std::vector<std::span<const double>> gs{g};
        AdamState s = AdamState::for_blocks(std::span<const std::span<double>>(ps));
        adam_step(ps, gs, s, 1e-3);
        CHECK(p[0] == -1e-3 * 1.0 / (1.0 + 1e-8));
        CHECK(std::abs(p[0] - -9.99999995e-4) < 1e-11);
        CHECK(s.step_count == 1);
    }
    SUBCASE("zero gradient leaves params unchanged") {
        Vector p{1.5, -2.0}, g{0.0, 0.0};
        std::vector<std::span<double>> ps{p};
        std::vector<std::span<const double>> gs{g};
        AdamState s = AdamState::for_blocks(std::span<const std::span<double>>(ps));
        adam_step(ps, gs, s, 1e-3);
        CHECK(p == Vector{1.5, -2.0});
    }
    SUBCASE("constant gradient keeps |update| <= lr") {
        Vector p{0.0}, g{1.0};
        std::vector<std::span<double>> ps{p};
        std::vector<std::span<const double>> gs{g};
        AdamState s = AdamState::for_blocks(std::span<const std::span<double>>(ps));
        double prev = p[0];
        for (int i = 0; i < 2; ++i) {
            adam_step(ps, gs, s, 1e-3);
            CHECK(std::abs(p[0] - prev) <= 1e-3 * (1 + 1e-9));
            prev = p[0];
        }
    }
    SUBCASE("non-finite gradient names the block") {
        Vector p{0.0, 0.0}, q{0.0}, g{1.0, 2.0}, h{std::numeric_limits<double>::quiet_NaN()};
        std::vector<std::span<double>> ps{p, q};
        std::vector<std::span<const double>> gs{g, h};
        AdamState s = AdamState::for_blocks(std::span<const std::span<double>>(ps));
        const std::vector<std::string> names{"phi.W0", "trunk.b1"};
        try {
            adam_step(ps, gs, s, 1e-3, names);
            FAIL("expected NumericError");
        } catch (const NumericError& e) {
            CHECK(std::string(e.what()).find("trunk.b1") != std::string::npos);
        }
        CHECK_THROWS_AS(adam_step(ps, gs, s, 0.0), InvalidArgument);
    }
    SUBCASE("block order does not change any block's update") {
        Rng rng(4, 4);
        Vector a = random_vector(5, rng), b = random_vector(3, rng);
        Vector ga = random_vector(5, rng), gb = random_vector(3, rng);
        Vector a2 = a, b2 = b;
        std::vector<std::span<double>> p1{a, b}, p2{b2, a2};
        std::vector<std::span<const double>> g1{ga, gb}, g2{gb, ga};
        AdamState s1 = AdamState::for_blocks(std::span<const std::span<double>>(p1));
        AdamState s2 = AdamState::for_blocks(std::span<const std::span<double>>(p2));
        for (int i = 0; i < 3; ++i) {
            adam_step(p1, g1, s1, 1e-2);
            adam_step(p2, g2, s2, 1e-2);
        }
        CHECK(a == a2);
        CHECK(b == b2);
    }
}

TEST_CASE("cholesky_factor examples") {
    CHECK(cholesky_factor(DenseMatrix::identity(3)) == DenseMatrix::identity(3));

    const DenseMatrix L = cholesky_factor(DenseMatrix(2, 2, Vector{4, 2, 2, 3}));
    CHECK(L(0, 0) == doctest::Approx(2.0));
    CHECK(L(0, 1) == 0.0);
    CHECK(L(1, 0) == doctest::Approx(1.0));
    CHECK(L(1, 1) == doctest::Approx(std::sqrt(2.0)));

    const pdegen::Grid grid(100);
    const pdegen::GpConfig gp;
    const DenseMatrix K = pdegen::se_kernel_matrix(grid, gp);
    const double jitter = 1e-8 * gp.variance;
    const DenseMatrix LK = cholesky_factor(K, jitter);
    DenseMatrix R = matmul(LK, LK.transpose());
    double err = 0;
    for (std::size_t i = 0; i < 100; ++i) {
        for (std::size_t j = 0; j < 100; ++j) err = std::max(err, std::abs(R(i, j) - K(i, j) - (i == j ? jitter : 0.0)));
    }
    CHECK(err < 1e-6);

    try {
        (void)cholesky_factor(DenseMatrix(3, 3, Vector{1, 0, 0, 0, -1, 0, 0, 0, 1}));
        FAIL("expected SingularSystemError");
    } catch (const SingularSystemError& e) {
        CHECK(e.pivot_index() == 1);
    }
}

TEST_CASE("cholesky residual property for well-conditioned SPD inputs") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed, 12);
        DenseMatrix A(20, 20);
        for (double& v : A.flat()) v = rng.uniform(-1, 1);
        DenseMatrix S = matmul(A, A.transpose());
        for (std::size_t i = 0; i < 20; ++i) S(i, i) += 1.0;
        const DenseMatrix L = cholesky_factor(S);
        const DenseMatrix R = matmul(L, L.transpose());
        double err = 0;
        for (std::size_t i = 0; i < S.size(); ++i) err = std::max(err, std::abs(R.flat()[i] - S.flat()[i]));
        CHECK(err < 1e-8 * S.max_abs());
    }
}

TEST_CASE("parallel_for visits each index once and rethrows the lowest failure") {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    try {
        parallel_for(100, [](std::size_t i) {
            if (i == 37 || i == 80) throw InvalidArgument("fail " + std::to_string(i));
        });
        FAIL("expected an exception");
    } catch (const InvalidArgument& e) {
        CHECK(std::string(e.what()) == "fail 37");
    }
    CHECK(worker_count() >= 1);
}
