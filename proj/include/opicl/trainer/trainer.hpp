#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "opicl/deeposets/checkpoint.hpp"
#include "opicl/deeposets/model.hpp"
#include "opicl/ndmath/adam.hpp"
#include "opicl/pdegen/instance.hpp"

namespace opicl::trainer {

struct TrainConfig {
    std::uint64_t iterations = 50000;
    std::size_t batch_size = 100;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    /// Log the mini-batch loss every this many iterations.
    std::uint64_t eval_every = 100;
    /// Write a checkpoint every this many iterations (needs a checkpoint path).
    std::uint64_t checkpoint_every = 5000;
    /// Global gradient-norm clip; 0 disables.
    double clip_norm = 0.0;
    /// Per sampled instance, draw which of its m + 1 pairs serves as the query.
    bool rotate_query = false;
    deeposets::ArchConfig arch;

    void validate() const;
};

struct StepLog {
    std::uint64_t iteration = 0;
    double train_mse = 0.0;
    double wall_seconds = 0.0;
};

struct EvalReport {
    double mse = 0.0;
    std::size_t count = 0;
    std::map<std::string, double> per_family_mse;
    std::map<std::string, std::size_t> per_family_count;
};

struct TrainMetrics {
    std::vector<StepLog> steps;
    std::optional<double> final_train_mse;
    std::optional<EvalReport> final_eval;
};

/// Everything needed to continue a run exactly where it stopped.
struct TrainerState {
    deeposets::ModelParams params;
    ndmath::AdamState optimizer;
    std::uint64_t step = 0;
    deeposets::RngPosition sampler;
};

/// Fresh state: parameters from Rng(seed, kInitStream), sampler at Rng(seed, kSamplerStream).
TrainerState initial_state(const TrainConfig& config);

inline constexpr std::uint64_t kInitStream = 0x494E4954;    // "INIT"
inline constexpr std::uint64_t kSamplerStream = 0x53414D50; // "SAMP"

struct TrainHooks {
    /// Called after every logged step.
    std::function<void(const StepLog&)> on_log;
    /// Where periodic and final checkpoints go; empty disables checkpointing.
    std::filesystem::path checkpoint_path;
};

struct TrainResult {
    deeposets::ModelParams params;
    TrainMetrics metrics;
    TrainerState state;
};

/// Runs config.iterations - state.step Adam steps on mini-batches drawn
/// uniformly with replacement from `dataset`. A non-finite loss aborts with
/// NumericError that names the last checkpoint written. Step logs are
/// appended to `prior` (the log of a resumed run).
TrainResult train(const TrainConfig& config, std::span<const pdegen::OperatorInstance> dataset, TrainerState state,
                  const TrainHooks& hooks = {}, TrainMetrics prior = {});
TrainResult train(const TrainConfig& config, std::span<const pdegen::OperatorInstance> dataset,
                  const TrainHooks& hooks = {});

/// Indices of one mini-batch; advances the sampler.
std::vector<std::size_t> sample_batch(ndmath::Rng& sampler, std::size_t dataset_size, std::size_t batch_size);

/// MSE of predict_function against each query solution, overall and per family.
/// Instance order does not affect the result.
EvalReport evaluate(const deeposets::ModelParams& params, std::span<const pdegen::OperatorInstance> instances,
                    bool per_family = true);

/// Relative L2 error ‖prediction − exact‖ / ‖exact‖.
double relative_l2(std::span<const double> prediction, std::span<const double> exact);

nlohmann::json config_to_json(const TrainConfig& config);
TrainConfig config_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const TrainConfig& config, const TrainerState& state,
                     const TrainMetrics& metrics);

struct LoadedCheckpoint {
    TrainConfig config;
    TrainerState state;
    TrainMetrics metrics;
};

/// Wall-clock fields are not stored, so restored step logs carry wall_seconds = 0.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// iteration,train_mse,wall_seconds
void write_metrics_csv(const std::filesystem::path& path, const TrainMetrics& metrics);

} // namespace opicl::trainer
