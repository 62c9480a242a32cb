#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include "opicl/errors.hpp"
#include "opicl/io/csv.hpp"
#include "opicl/trainer/trainer.hpp"
#include "support/test_support.hpp"

using namespace opicl;
using namespace opicl::trainer;
using pdegen::OperatorInstance;

namespace {

deeposets::ArchConfig small_arch(std::size_t grid_n) {
    deeposets::ArchConfig a;
    a.grid_n = grid_n;
    a.phi_hidden = {32};
    a.latent_dim = 16;
    a.branch_hidden = {32};
    a.trunk_hidden = {32};
    a.basis_dim = 16;
    return a;
}

TrainConfig tiny_config(std::uint64_t iterations, std::uint64_t seed = 1) {
    TrainConfig c;
    c.iterations = iterations;
    c.batch_size = 4;
    c.seed = seed;
    c.eval_every = 10;
    c.arch = testing::tiny_arch();
    return c;
}

std::vector<OperatorInstance> instances(std::size_t per_family, std::uint64_t seed, std::size_t grid_n = 8) {
    return pdegen::generate_dataset(testing::small_gen(grid_n), pdegen::ProblemFamily::all(), per_family, seed)
        .instances;
}

double mean_power(std::span<const OperatorInstance> data) {
    double s = 0;
    std::size_t n = 0;
    for (const auto& inst : data) {
        for (double v : inst.query.solution.values) {
            s += v * v;
            ++n;
        }
    }
    return s / double(n);
}

} // namespace

TEST_CASE("zero iterations returns the initial parameters") {
    const auto data = instances(2, 1);
    const TrainConfig c = tiny_config(0);
    const auto r = train(c, data);
    CHECK(r.params == initial_state(c).params);
    CHECK(r.metrics.steps.empty());
    CHECK(r.state.step == 0);
}

TEST_CASE("training is deterministic in the seed") {
    const auto data = instances(2, 2);
    const auto a = train(tiny_config(30, 5), data);
    const auto b = train(tiny_config(30, 5), data);
    const auto c = train(tiny_config(30, 6), data);
    CHECK(a.params == b.params);
    CHECK(a.state.optimizer == b.state.optimizer);
    CHECK_FALSE(a.params == c.params);
}

TEST_CASE("a handful of instances can be fit") {
    const std::size_t n = 16;
    auto all = instances(1, 3, n);
    const std::vector<OperatorInstance> data(all.begin(), all.end());
    TrainConfig c;
    c.iterations = 2000;
    c.batch_size = 4;
    c.seed = 2;
    c.eval_every = 500;
    c.arch = small_arch(n);
    const double before = evaluate(initial_state(c).params, data, false).mse;
    const auto r = train(c, data);
    REQUIRE(r.metrics.final_train_mse.has_value());
    CHECK(*r.metrics.final_train_mse < 0.05 * before);
    CHECK(*r.metrics.final_train_mse < 0.05 * mean_power(data));
}

TEST_CASE("resuming from a checkpoint is bit-identical") {
    testing::TempDir dir;
    const auto data = instances(3, 4);
    TrainConfig c = tiny_config(200, 7);
    c.checkpoint_every = 100;
    const auto full = train(c, data);

    TrainConfig half = c;
    half.iterations = 100;
    TrainHooks hooks;
    hooks.checkpoint_path = dir / "half.opicl";
    (void)train(half, data, hooks);
    const auto loaded = load_checkpoint(hooks.checkpoint_path);
    CHECK(loaded.state.step == 100);
    CHECK(loaded.config.seed == 7);
    const auto resumed = train(c, data, loaded.state, {}, loaded.metrics);
    CHECK(resumed.params == full.params);
    CHECK(resumed.state.optimizer == full.state.optimizer);
    CHECK(resumed.state.sampler == full.state.sampler);
    REQUIRE(resumed.metrics.steps.size() == full.metrics.steps.size());
    for (std::size_t i = 0; i < full.metrics.steps.size(); ++i) {
        CHECK(resumed.metrics.steps[i].iteration == full.metrics.steps[i].iteration);
        CHECK(resumed.metrics.steps[i].train_mse == full.metrics.steps[i].train_mse);
    }
}

TEST_CASE("sample_batch draws uniformly with replacement") {
    ndmath::Rng rng(9, kSamplerStream);
    const std::size_t n = 20;
    std::vector<std::size_t> counts(n, 0);
    for (int b = 0; b < 1000; ++b) {
        const auto idx = sample_batch(rng, n, 100);
        REQUIRE(idx.size() == 100);
        for (auto i : idx) {
            REQUIRE(i < n);
            ++counts[i];
        }
    }
    for (auto k : counts) CHECK(std::abs(double(k) - 5000.0) <= 250.0);
    CHECK(sample_batch(rng, 1, 7) == std::vector<std::size_t>(7, 0));
}

TEST_CASE("evaluate examples") {
    auto data = instances(2, 5);
    ndmath::Rng rng(1, 1);
    const auto zero = deeposets::init_params(testing::tiny_arch(), rng).zeros_like();

    SUBCASE("constant zero predictor gives the mean power") {
        const auto e = evaluate(zero, data);
        CHECK(e.mse == doctest::Approx(mean_power(data)).epsilon(1e-12));
        CHECK(e.count == data.size());
        for (const auto& f : pdegen::ProblemFamily::all()) {
            std::vector<OperatorInstance> sub;
            for (const auto& inst : data) {
                if (inst.family == f) sub.push_back(inst);
            }
            CHECK(e.per_family_mse.at(f.name()) == doctest::Approx(mean_power(sub)).epsilon(1e-12));
            CHECK(e.per_family_count.at(f.name()) == 2);
        }
    }
    SUBCASE("perfect predictor gives zero") {
        for (auto& inst : data) std::fill(inst.query.solution.values.begin(), inst.query.solution.values.end(), 0.0);
        CHECK(evaluate(zero, data).mse == 0.0);
    }
    SUBCASE("instance order does not matter") {
        const auto p = train(tiny_config(20), data).params;
        auto rev = data;
        std::reverse(rev.begin(), rev.end());
        CHECK(evaluate(p, rev).mse == evaluate(p, data).mse);
    }
    SUBCASE("empty set is rejected") {
        CHECK_THROWS_AS(evaluate(zero, std::span<const OperatorInstance>{}), InvalidArgument);
        CHECK_THROWS_AS(train(tiny_config(5), std::span<const OperatorInstance>{}), InvalidArgument);
    }
}

TEST_CASE("relative_l2 examples") {
    const std::vector<double> exact{3, 4};
    CHECK(relative_l2(exact, exact) == 0.0);
    CHECK(relative_l2(std::vector<double>{0, 0}, exact) == doctest::Approx(1.0));
    CHECK(relative_l2(std::vector<double>{3, 5}, exact) == doctest::Approx(0.2));
    CHECK_THROWS_AS(relative_l2(exact, std::vector<double>{0, 0}), NumericError);
}

TEST_CASE("metrics CSV parses back") {
    testing::TempDir dir;
    const auto data = instances(2, 6);
    const auto r = train(tiny_config(50), data);
    REQUIRE(r.metrics.steps.size() == 5);
    const auto path = dir / "m.csv";
    write_metrics_csv(path, r.metrics);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "iteration,train_mse,wall_seconds");
    std::size_t row = 0;
    while (std::getline(in, line)) {
        const auto cells = io::split_csv_line(line);
        REQUIRE(cells.size() == 3);
        CHECK(std::stoull(cells[0]) == r.metrics.steps[row].iteration);
        CHECK(io::parse_double(cells[1]) == r.metrics.steps[row].train_mse);
        ++row;
    }
    CHECK(row == 5);
}

TEST_CASE("loss falls over training") {
    const auto data = instances(4, 7);
    TrainConfig c = tiny_config(600, 3);
    c.batch_size = 16;
    c.eval_every = 50;
    const auto r = train(c, data);
    double first = 0, last = 0;
    for (std::size_t i = 0; i < 3; ++i) first += r.metrics.steps[i].train_mse;
    for (std::size_t i = r.metrics.steps.size() - 3; i < r.metrics.steps.size(); ++i) last += r.metrics.steps[i].train_mse;
    CHECK(last < first);
}

TEST_CASE("config validation") {
    TrainConfig c = tiny_config(10);
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = tiny_config(10);
    c.lr = -1;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = tiny_config(10);
    CHECK(config_from_json(config_to_json(c)).seed == c.seed);
    CHECK(config_from_json(config_to_json(c)).arch == c.arch);
}

TEST_CASE("query rotation") {
    const auto data = instances(2, 8);
    TrainConfig c = tiny_config(40, 4);
    c.rotate_query = true;
    const auto a = train(c, data);
    const auto b = train(c, data);
    CHECK(a.params == b.params);
    TrainConfig plain = c;
    plain.rotate_query = false;
    CHECK_FALSE(train(plain, data).params == a.params);
    CHECK(config_from_json(config_to_json(c)).rotate_query);

    testing::TempDir dir;
    TrainConfig half = c;
    half.iterations = 20;
    TrainHooks hooks;
    hooks.checkpoint_path = dir / "r.opicl";
    (void)train(half, data, hooks);
    const auto loaded = load_checkpoint(hooks.checkpoint_path);
    CHECK(loaded.config.rotate_query);
    CHECK(train(c, data, loaded.state, {}, loaded.metrics).params == a.params);
}
