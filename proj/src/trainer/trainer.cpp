#include "opicl/trainer/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "opicl/errors.hpp"
#include "opicl/io/csv.hpp"
#include "opicl/ndmath/parallel.hpp"

namespace opicl::trainer {

using nlohmann::json;

void TrainConfig::validate() const {
    if (batch_size == 0) throw InvalidArgument("batch_size must be positive");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw InvalidArgument("lr must be positive and finite");
    if (eval_every == 0) throw InvalidArgument("eval_every must be positive");
    if (checkpoint_every == 0) throw InvalidArgument("checkpoint_every must be positive");
    if (!(clip_norm >= 0.0)) throw InvalidArgument("clip_norm must be non-negative");
    arch.validate();
}

TrainerState initial_state(const TrainConfig& config) {
    config.validate();
    TrainerState s;
    ndmath::Rng init_rng(config.seed, kInitStream);
    s.params = deeposets::init_params(config.arch, init_rng);
    const auto blocks = s.params.blocks();
    s.optimizer = ndmath::AdamState::for_blocks(std::span<const std::span<double>>(blocks));
    s.sampler = {config.seed, kSamplerStream, 0};
    return s;
}

std::vector<std::size_t> sample_batch(ndmath::Rng& sampler, std::size_t dataset_size, std::size_t batch_size) {
    if (dataset_size == 0) throw InvalidArgument("cannot sample from an empty dataset");
    std::vector<std::size_t> idx(batch_size);
    for (auto& i : idx) i = std::size_t(sampler.uniform_index(dataset_size));
    return idx;
}

namespace {

double sorted_sum(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

void check_dataset(std::span<const pdegen::OperatorInstance> dataset, std::size_t grid_n) {
    if (dataset.empty()) throw InvalidArgument("empty dataset");
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto& inst = dataset[i];
        if (inst.query.parameter.size() != grid_n || inst.query.solution.size() != grid_n) {
            throw ShapeError("instance " + std::to_string(i) + " does not match grid size " + std::to_string(grid_n));
        }
        if (inst.prompt.empty()) throw InvalidArgument("instance " + std::to_string(i) + " has an empty prompt");
    }
}

void clip_gradients(deeposets::ModelParams& grads, double max_norm) {
    double sq = 0.0;
    for (const auto& b : std::as_const(grads).blocks()) {
        for (double g : b) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm <= max_norm) return;
    const double scale = max_norm / norm;
    for (auto& b : grads.blocks()) {
        for (double& g : b) g *= scale;
    }
}

} // namespace

TrainResult train(const TrainConfig& config, std::span<const pdegen::OperatorInstance> dataset, TrainerState state,
                  const TrainHooks& hooks, TrainMetrics prior) {
    config.validate();
    deeposets::check_params(state.params, config.arch);
    check_dataset(dataset, config.arch.grid_n);
    if (state.step > config.iterations) {
        throw InvalidArgument("state is at step " + std::to_string(state.step) + ", past the configured " +
                              std::to_string(config.iterations) + " iterations");
    }

    const pdegen::Grid grid(config.arch.grid_n);
    ndmath::Rng sampler(state.sampler.seed, state.sampler.stream_id, state.sampler.position);
    const auto names = state.params.block_names();
    TrainMetrics metrics = std::move(prior);
    std::string last_checkpoint;
    const auto start = std::chrono::steady_clock::now();
    std::vector<const pdegen::OperatorInstance*> batch(config.batch_size);
    std::vector<pdegen::OperatorInstance> rotated(config.rotate_query ? config.batch_size : 0);

    auto checkpoint = [&] {
        if (hooks.checkpoint_path.empty()) return;
        save_checkpoint(hooks.checkpoint_path, config, state, metrics);
        last_checkpoint = hooks.checkpoint_path.string() + " (step " + std::to_string(state.step) + ")";
    };

    while (state.step < config.iterations) {
        const auto idx = sample_batch(sampler, dataset.size(), config.batch_size);
        for (std::size_t b = 0; b < idx.size(); ++b) batch[b] = &dataset[idx[b]];
        if (config.rotate_query) {
            for (std::size_t b = 0; b < idx.size(); ++b) {
                rotated[b] = *batch[b];
                const auto k = std::size_t(sampler.uniform_index(rotated[b].prompt.size() + 1));
                if (k < rotated[b].prompt.size()) std::swap(rotated[b].prompt[k], rotated[b].query);
                batch[b] = &rotated[b];
            }
        }

        deeposets::LossAndGradients lg;
        try {
            lg = deeposets::loss_and_gradients(state.params, batch, grid);
        } catch (const NumericError& e) {
            throw NumericError("training diverged at iteration " + std::to_string(state.step + 1) + ": " + e.what() +
                               "; last checkpoint: " + (last_checkpoint.empty() ? "none" : last_checkpoint));
        }
        if (config.clip_norm > 0.0) clip_gradients(lg.grads, config.clip_norm);

        const auto pblocks = state.params.blocks();
        const auto gblocks = std::as_const(lg.grads).blocks();
        ndmath::adam_step(pblocks, gblocks, state.optimizer, config.lr, names);
        ++state.step;
        state.sampler.position = sampler.position();

        if (state.step % config.eval_every == 0 || state.step == config.iterations) {
            const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            metrics.steps.push_back({state.step, lg.loss, elapsed});
            if (hooks.on_log) hooks.on_log(metrics.steps.back());
        }
        if (state.step % config.checkpoint_every == 0 && state.step != config.iterations) checkpoint();
    }

    metrics.final_train_mse = evaluate(state.params, dataset, false).mse;
    checkpoint();
    return {state.params, std::move(metrics), std::move(state)};
}

TrainResult train(const TrainConfig& config, std::span<const pdegen::OperatorInstance> dataset,
                  const TrainHooks& hooks) {
    return train(config, dataset, initial_state(config), hooks);
}

EvalReport evaluate(const deeposets::ModelParams& params, std::span<const pdegen::OperatorInstance> instances,
                    bool per_family) {
    if (instances.empty()) throw InvalidArgument("empty dataset");
    const deeposets::ArchConfig arch = deeposets::arch_of(params);
    check_dataset(instances, arch.grid_n);
    const pdegen::Grid grid(arch.grid_n);

    std::vector<double> mse(instances.size());
    ndmath::parallel_for(instances.size(), [&](std::size_t i) {
        const auto& inst = instances[i];
        const auto pred = deeposets::predict_function(params, inst.prompt, inst.query.parameter.values, grid);
        double s = 0.0;
        for (std::size_t k = 0; k < pred.size(); ++k) {
            const double d = pred.values[k] - inst.query.solution.values[k];
            s += d * d;
        }
        mse[i] = s / double(pred.size());
    });
    for (std::size_t i = 0; i < mse.size(); ++i) {
        if (!std::isfinite(mse[i])) throw NumericError("non-finite prediction error on instance " + std::to_string(i));
    }

    EvalReport report;
    report.count = instances.size();
    report.mse = sorted_sum(mse) / double(mse.size());
    if (per_family) {
        std::map<std::string, std::vector<double>> groups;
        for (std::size_t i = 0; i < instances.size(); ++i) groups[instances[i].family.name()].push_back(mse[i]);
        for (auto& [name, v] : groups) {
            report.per_family_count[name] = v.size();
            report.per_family_mse[name] = sorted_sum(std::move(v)) / double(report.per_family_count[name]);
        }
    }
    return report;
}

double relative_l2(std::span<const double> prediction, std::span<const double> exact) {
    if (prediction.size() != exact.size()) throw ShapeError("relative_l2: length mismatch");
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < exact.size(); ++i) {
        const double d = prediction[i] - exact[i];
        num += d * d;
        den += exact[i] * exact[i];
    }
    if (den == 0.0) throw NumericError("relative_l2: exact function is identically zero");
    return std::sqrt(num / den);
}

json config_to_json(const TrainConfig& c) {
    return {{"iterations", c.iterations},
            {"batch_size", c.batch_size},
            {"lr", c.lr},
            {"seed", c.seed},
            {"eval_every", c.eval_every},
            {"checkpoint_every", c.checkpoint_every},
            {"clip_norm", c.clip_norm},
            {"rotate_query", c.rotate_query},
            {"arch", deeposets::arch_to_json(c.arch)}};
}

TrainConfig config_from_json(const json& j) {
    TrainConfig c;
    c.iterations = j.value("iterations", c.iterations);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.seed = j.value("seed", c.seed);
    c.eval_every = j.value("eval_every", c.eval_every);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.rotate_query = j.value("rotate_query", c.rotate_query);
    if (j.contains("arch")) c.arch = deeposets::arch_from_json(j.at("arch"));
    c.validate();
    return c;
}

void save_checkpoint(const std::filesystem::path& path, const TrainConfig& config, const TrainerState& state,
                     const TrainMetrics& metrics) {
    json iters = json::array();
    json losses = json::array();
    for (const auto& s : metrics.steps) {
        iters.push_back(s.iteration);
        losses.push_back(s.train_mse);
    }
    deeposets::Checkpoint ckpt;
    ckpt.params = state.params;
    ckpt.step = state.step;
    ckpt.seed = config.seed;
    ckpt.optimizer = state.optimizer;
    ckpt.sampler = state.sampler;
    ckpt.extra = {{"train_config", config_to_json(config)},
                  {"metrics", {{"iteration", std::move(iters)}, {"train_mse", std::move(losses)}}}};
    if (metrics.final_train_mse) ckpt.extra["metrics"]["final_train_mse"] = *metrics.final_train_mse;
    deeposets::write_checkpoint(path, ckpt);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    deeposets::Checkpoint ckpt = deeposets::read_checkpoint(path);
    LoadedCheckpoint out;
    try {
        if (ckpt.extra.contains("train_config")) {
            out.config = config_from_json(ckpt.extra.at("train_config"));
        } else {
            out.config.seed = ckpt.seed;
            out.config.arch = deeposets::arch_of(ckpt.params);
        }
        if (out.config.arch != deeposets::arch_of(ckpt.params)) {
            throw SchemaError("'" + path.string() + "': stored config disagrees with parameter shapes");
        }
        if (ckpt.extra.contains("metrics")) {
            const json& m = ckpt.extra.at("metrics");
            const auto iters = m.at("iteration").get<std::vector<std::uint64_t>>();
            const auto losses = m.at("train_mse").get<std::vector<double>>();
            if (iters.size() != losses.size()) throw SchemaError("'" + path.string() + "': metrics length mismatch");
            for (std::size_t i = 0; i < iters.size(); ++i) out.metrics.steps.push_back({iters[i], losses[i], 0.0});
            if (m.contains("final_train_mse")) out.metrics.final_train_mse = m.at("final_train_mse").get<double>();
        }
    } catch (const json::exception& e) {
        throw SchemaError("'" + path.string() + "': bad training metadata: " + e.what());
    } catch (const InvalidArgument& e) {
        throw SchemaError("'" + path.string() + "': " + e.what());
    }
    out.state.params = std::move(ckpt.params);
    out.state.step = ckpt.step;
    if (ckpt.optimizer) {
        out.state.optimizer = std::move(*ckpt.optimizer);
    } else {
        const auto blocks = out.state.params.blocks();
        out.state.optimizer = ndmath::AdamState::for_blocks(std::span<const std::span<double>>(blocks));
    }
    out.state.sampler = ckpt.sampler.value_or(deeposets::RngPosition{ckpt.seed, kSamplerStream, 0});
    return out;
}

void write_metrics_csv(const std::filesystem::path& path, const TrainMetrics& metrics) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << "iteration,train_mse,wall_seconds\n";
    for (const auto& s : metrics.steps) {
        out << s.iteration << ',' << io::format_double(s.train_mse) << ',' << io::format_double(s.wall_seconds)
            << '\n';
    }
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

} // namespace opicl::trainer
