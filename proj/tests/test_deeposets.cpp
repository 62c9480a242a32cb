#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "opicl/deeposets/checkpoint.hpp"
#include "opicl/deeposets/model.hpp"
#include "opicl/errors.hpp"
#include "opicl/io/container.hpp"
#include "support/test_support.hpp"

using namespace opicl;
using namespace opicl::deeposets;
using ndmath::Rng;
using pdegen::OperatorInstance;

namespace {

Vector chain(const ndmath::MlpParams& p, Vector a) {
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

/// The model written as one straight chain of loops.
double oracle_forward(const ModelParams& p, Prompt prompt, std::span<const double> uq, double x) {
    Vector latent(p.phi.output_width(), 0.0);
    for (const auto& pair : prompt) {
        Vector in = pair.parameter.values;
        in.insert(in.end(), pair.solution.values.begin(), pair.solution.values.end());
        const Vector h = chain(p.phi, in);
        for (std::size_t i = 0; i < h.size(); ++i) latent[i] += h[i];
    }
    for (double& v : latent) v /= double(prompt.size());
    latent.insert(latent.end(), uq.begin(), uq.end());
    const Vector b = chain(p.branch, latent);
    const Vector t = chain(p.trunk, Vector{x});
    double s = p.output_bias;
    for (std::size_t i = 0; i < b.size(); ++i) s += b[i] * t[i];
    return s;
}

ModelParams random_params(const ArchConfig& arch, std::uint64_t seed) {
    Rng rng(seed, 0);
    ModelParams p = init_params(arch, rng);
    for (auto& blk : p.blocks()) {
        if (blk.size() == 1) continue;
        for (double& v : blk) v += rng.uniform(-0.05, 0.05);
    }
    p.output_bias = 0.1;
    return p;
}

std::vector<OperatorInstance> small_instances(std::size_t count, std::uint64_t seed, std::size_t grid_n = 8) {
    return pdegen::generate_dataset(testing::small_gen(grid_n), pdegen::ProblemFamily::all(), count, seed).instances;
}

} // namespace

TEST_CASE("init_params examples") {
    const ArchConfig arch;
    Rng r1(1, 2), r2(1, 2);
    const ModelParams p = init_params(arch, r1);
    CHECK(p.phi.widths() == std::vector<std::size_t>{200, 400, 400, 500});
    CHECK(p.branch.widths() == std::vector<std::size_t>{600, 200, 400, 200, 150});
    CHECK(p.trunk.widths() == std::vector<std::size_t>{1, 200, 400, 200, 150});
    CHECK(p.output_bias == 0.0);
    CHECK(p == init_params(arch, r2));
    CHECK(arch_of(p) == arch);
    CHECK(p.block_names().size() == p.blocks().size());
    std::size_t total = 0;
    for (const auto& b : std::as_const(p).blocks()) total += b.size();
    CHECK(total == p.parameter_count());

    ArchConfig bad = arch;
    bad.latent_dim = 0;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    CHECK_THROWS_AS(check_params(p, testing::tiny_arch()), ShapeError);
}

TEST_CASE("encode_prompt examples") {
    const ArchConfig arch = testing::tiny_arch();
    const ModelParams p = random_params(arch, 3);
    const auto inst = small_instances(1, 4).front();
    Prompt one(inst.prompt.data(), 1);
    Vector in = inst.prompt[0].parameter.values;
    in.insert(in.end(), inst.prompt[0].solution.values.begin(), inst.prompt[0].solution.values.end());
    CHECK(encode_prompt(p, one) == ndmath::mlp_eval(p.phi, in));

    std::vector<pdegen::FunctionPair> twice{inst.prompt[0], inst.prompt[0]};
    CHECK(encode_prompt(p, twice) == encode_prompt(p, one));

    auto perm = inst.prompt;
    std::reverse(perm.begin(), perm.end());
    CHECK(encode_prompt(p, perm) == encode_prompt(p, inst.prompt));

    CHECK_THROWS_AS(encode_prompt(p, Prompt{}), InvalidArgument);
    auto bad = inst.prompt;
    bad[1].solution.values.pop_back();
    CHECK_THROWS_AS(encode_prompt(p, bad), ShapeError);
}

TEST_CASE("forward examples") {
    const ArchConfig arch = testing::tiny_arch();
    const auto insts = small_instances(2, 5);
    SUBCASE("zero branch head gives zero output") {
        ModelParams p = random_params(arch, 6);
        std::fill(p.branch.weights.back().flat().begin(), p.branch.weights.back().flat().end(), 0.0);
        std::fill(p.branch.biases.back().begin(), p.branch.biases.back().end(), 0.0);
        p.output_bias = 0.0;
        for (const auto& inst : insts) {
            for (double x : {0.0, 0.3, 1.0}) CHECK(forward(p, {inst.prompt, inst.query.parameter.values, x}) == 0.0);
        }
    }
    SUBCASE("straight-line oracle") {
        const ModelParams p = random_params(arch, 7);
        for (const auto& inst : insts) {
            for (double x : {0.0, 0.25, 0.61, 1.0}) {
                const double got = forward(p, {inst.prompt, inst.query.parameter.values, x});
                CHECK(std::abs(got - oracle_forward(p, inst.prompt, inst.query.parameter.values, x)) <= 1e-12);
            }
        }
    }
    SUBCASE("permutations of the prompt are bit-identical") {
        const ModelParams p = random_params(arch, 8);
        auto pairs = insts[0].prompt;
        const double ref = forward(p, {pairs, insts[0].query.parameter.values, 0.4});
        Rng rng(1, 1);
        for (int t = 0; t < 50; ++t) {
            for (std::size_t i = pairs.size(); i > 1; --i) std::swap(pairs[i - 1], pairs[rng.uniform_index(i)]);
            CHECK(forward(p, {pairs, insts[0].query.parameter.values, 0.4}) == ref);
        }
    }
    SUBCASE("any prompt length works") {
        const ModelParams p = random_params(arch, 9);
        pdegen::GenConfig g = testing::small_gen();
        for (std::size_t m : {1, 3, 9}) {
            g.prompt_size = m;
            Rng rng(m, 0);
            const auto inst = pdegen::build_operator_instance({pdegen::Pde::poisson, pdegen::Direction::forward}, g, rng);
            const double got = forward(p, {inst.prompt, inst.query.parameter.values, 0.5});
            CHECK(std::abs(got - oracle_forward(p, inst.prompt, inst.query.parameter.values, 0.5)) <= 1e-12);
        }
    }
    SUBCASE("head homogeneity in the trunk output layer") {
        const ModelParams p = random_params(arch, 10);
        ModelParams q = p;
        std::fill(q.trunk.biases.back().begin(), q.trunk.biases.back().end(), 0.0);
        ModelParams q2 = q;
        for (double& w : q2.trunk.weights.back().flat()) w *= 2.0;
        const auto& inst = insts[1];
        for (double x : {0.1, 0.9}) {
            const double base = forward(q, {inst.prompt, inst.query.parameter.values, x}) - q.output_bias;
            const double scaled = forward(q2, {inst.prompt, inst.query.parameter.values, x}) - q2.output_bias;
            CHECK(scaled == 2.0 * base);
        }
    }
}

TEST_CASE("predict_function examples") {
    const ArchConfig arch = testing::tiny_arch(100);
    const ModelParams p = random_params(arch, 11);
    const auto inst = small_instances(1, 12, 100).front();
    const pdegen::Grid grid(100);
    const auto pred = predict_function(p, inst.prompt, inst.query.parameter.values, grid);
    REQUIRE(pred.size() == 100);
    for (std::size_t i = 0; i < 100; ++i) {
        CHECK(std::abs(pred.values[i] - forward(p, {inst.prompt, inst.query.parameter.values, grid[i]})) <= 1e-12);
    }
    const std::vector<double> one{0.37};
    const Vector single = predict_function(p, inst.prompt, inst.query.parameter.values, one);
    REQUIRE(single.size() == 1);
    CHECK(std::abs(single[0] - forward(p, {inst.prompt, inst.query.parameter.values, 0.37})) <= 1e-12);
    const std::vector<double> off{0.005};
    CHECK(std::isfinite(predict_function(p, inst.prompt, inst.query.parameter.values, off)[0]));
    CHECK_THROWS_AS(predict_function(p, inst.prompt, std::vector<double>(99, 0.0), grid), ShapeError);
}

TEST_CASE("loss_and_gradients examples") {
    const ArchConfig arch = testing::tiny_arch();
    const pdegen::Grid grid(arch.grid_n);
    auto insts = small_instances(1, 13);

    SUBCASE("exact predictor has zero loss and gradients") {
        Rng rng(1, 1);
        const ModelParams p = init_params(arch, rng).zeros_like();
        auto batch = insts;
        for (auto& inst : batch) std::fill(inst.query.solution.values.begin(), inst.query.solution.values.end(), 0.0);
        const auto lg = loss_and_gradients(p, batch, grid);
        CHECK(lg.loss == 0.0);
        for (const auto& b : std::as_const(lg.grads).blocks()) {
            CHECK(std::all_of(b.begin(), b.end(), [](double v) { return v == 0.0; }));
        }
    }
    SUBCASE("constant offset of one gives loss one") {
        Rng rng(1, 1);
        ModelParams p = init_params(arch, rng).zeros_like();
        p.output_bias = 1.0;
        std::vector<OperatorInstance> batch{insts[0]};
        std::fill(batch[0].query.solution.values.begin(), batch[0].query.solution.values.end(), 0.0);
        CHECK(loss_and_gradients(p, batch, grid).loss == 1.0);
    }
    SUBCASE("matches the mean of per-instance errors") {
        const ModelParams p = random_params(arch, 14);
        double expect = 0;
        for (const auto& inst : insts) {
            const auto pred = predict_function(p, inst.prompt, inst.query.parameter.values, grid);
            for (std::size_t i = 0; i < grid.size(); ++i) {
                const double d = pred.values[i] - inst.query.solution.values[i];
                expect += d * d;
            }
        }
        expect /= double(insts.size() * grid.size());
        CHECK(loss_and_gradients(p, insts, grid).loss == doctest::Approx(expect).epsilon(1e-12));
    }
    SUBCASE("non-finite target names the instance") {
        const ModelParams p = random_params(arch, 15);
        auto batch = insts;
        batch[2].query.solution.values[3] = std::numeric_limits<double>::quiet_NaN();
        try {
            (void)loss_and_gradients(p, batch, grid);
            FAIL("expected NumericError");
        } catch (const NumericError& e) {
            CHECK(std::string(e.what()).find("instance 2") != std::string::npos);
        }
        CHECK_THROWS_AS(loss_and_gradients(p, std::span<const OperatorInstance>{}, grid), InvalidArgument);
    }
}

TEST_CASE("loss gradients match central finite differences") {
    const ArchConfig arch = testing::tiny_arch();
    const pdegen::Grid grid(arch.grid_n);
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        ModelParams p = random_params(arch, 20 + seed);
        auto batch = small_instances(1, 30 + seed);
        batch[1].prompt.pop_back();
        batch[3].prompt.push_back(batch[3].prompt.front());
        const auto lg = loss_and_gradients(p, batch, grid);
        std::vector<const OperatorInstance*> ptrs;
        for (const auto& b : batch) ptrs.push_back(&b);
        auto loss = [&] { return batch_loss(p, ptrs, grid); };
        const auto r = testing::check_gradient(p.blocks(), std::as_const(lg.grads).blocks(), loss, 1e-6, 1e-5);
        CHECK_MESSAGE(r.failed == 0, "seed " << seed << " worst " << r.worst);
        CHECK(r.checked == p.parameter_count());
    }
}

TEST_CASE("checkpoint roundtrip") {
    testing::TempDir dir;
    const ArchConfig arch = testing::tiny_arch();
    Checkpoint ck;
    ck.params = random_params(arch, 40);
    ck.step = 123;
    ck.seed = 9;
    auto blocks = ck.params.blocks();
    ndmath::AdamState s = ndmath::AdamState::for_blocks(std::span<const std::span<double>>(blocks));
    Rng rng(2, 2);
    for (auto& m : s.first_moment) {
        for (double& v : m) v = rng.normal();
    }
    for (auto& m : s.second_moment) {
        for (double& v : m) v = rng.uniform();
    }
    s.step_count = 123;
    ck.optimizer = s;
    ck.sampler = RngPosition{9, 77, 12345};
    ck.extra = {{"note", "x"}};
    const auto path = dir / "ck.opicl";
    write_checkpoint(path, ck);
    const Checkpoint back = read_checkpoint(path);
    CHECK(back.params == ck.params);
    CHECK(back.step == 123);
    CHECK(back.seed == 9);
    REQUIRE(back.optimizer.has_value());
    CHECK(*back.optimizer == s);
    CHECK(back.sampler == ck.sampler);
    CHECK(back.extra == ck.extra);

    SUBCASE("truncated file") {
        std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
        CHECK_THROWS_AS(read_checkpoint(path), SchemaError);
    }
    SUBCASE("version mismatch") {
        auto c = io::read_container(path);
        c.header["schema_version"] = 99;
        io::write_container(path, c.header, c.payload);
        CHECK_THROWS_AS(read_checkpoint(path), SchemaError);
    }
    SUBCASE("architecture that disagrees with the payload") {
        auto c = io::read_container(path);
        c.header["arch"]["latent_dim"] = 6;
        io::write_container(path, c.header, c.payload);
        CHECK_THROWS_AS(read_checkpoint(path), SchemaError);
    }
}
