#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "drin/adam.hpp"
#include "drin/bundle.hpp"
#include "drin/config.hpp"
#include "drin/model.hpp"
#include "drin/scoring.hpp"

namespace drin {

/// Everything needed to continue training bit-identically.
template <typename T>
struct TrainState {
    TrainConfig config;
    ModelParams<T> model;
    AdamState<T> adam;
    std::size_t epoch = 0; // completed epochs
    std::uint64_t split_seed = 0;
    std::mt19937_64 rng;
};

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0.0; // mean per-mention loss over the epoch
    std::size_t val_count = 0;
    std::map<int, double> val_metrics;
    double seconds = 0.0;
};

nlohmann::ordered_json to_json(const EpochLog& log, std::span<const int> ks);

struct TrainOptions {
    /// When set, the latest checkpoint goes to `out_dir / "checkpoint"` after
    /// every epoch and one JSON line per epoch is appended to `out_dir / "metrics.jsonl"`.
    std::optional<std::filesystem::path> out_dir;
    std::function<void(const EpochLog&)> on_epoch;
};

template <typename T>
struct TrainResult {
    TrainState<T> state;
    std::vector<EpochLog> log;
};

/// Training and validation record indices. Explicit split tags win
/// ("train" trains, "val" validates, "test" is left out); otherwise a
/// seeded shuffle holds out `val_fraction` of the records.
struct DataSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
};

DataSplit split_records(std::span<const MentionRecord> records, std::uint64_t seed, double val_fraction);

/// Fresh state: parameters initialised from `config.seed`. The train/val
/// split uses `split_seed` when given, else `config.seed`.
template <typename T>
TrainState<T> init_state(const TrainConfig& config, const BundleHeader& header,
                         std::optional<std::uint64_t> split_seed = std::nullopt);

/// Trains from scratch for `config.epochs` epochs.
template <typename T>
TrainResult<T> train(const Bundle& bundle, const TrainConfig& config, const TrainOptions& options = {});

/// Continues `state` until `state.config.epochs` epochs are complete.
template <typename T>
TrainResult<T> resume(const Bundle& bundle, TrainState<T> state, const TrainOptions& options = {});

struct EvalReport {
    std::vector<RankingResult> rankings;
    std::map<int, double> metrics;
};

/// Scores every record without touching the parameters. Records with a single
/// candidate are ranked trivially. `jobs` > 1 scores mentions in parallel.
template <typename T>
EvalReport evaluate(std::span<const MentionRecord> records, const ModelParams<T>& model, std::span<const int> ks,
                    std::size_t jobs = 1);

/// Throws ConfigError when the checkpointed model cannot read the bundle.
void check_compatible(const ModelShape& shape, const BundleHeader& header);

template <typename T>
void save_checkpoint(const TrainState<T>& state, const std::filesystem::path& dir);

template <typename T>
TrainState<T> load_checkpoint(const std::filesystem::path& dir);

Precision checkpoint_precision(const std::filesystem::path& dir);

struct SweepRow {
    std::size_t layers = 0;
    std::size_t runs = 0;
    std::map<int, double> mean;
    std::map<int, double> stddev;
};

/// One training run per (layer count, repetition); repetition i uses seed + i.
/// Metrics are validation Top-K after the final epoch.
template <typename T>
std::vector<SweepRow> layer_sweep(const Bundle& bundle, const TrainConfig& config,
                                  std::span<const std::size_t> layer_values);

std::string sweep_table(std::span<const SweepRow> rows, std::span<const int> ks);

/// Calls `fn(float{})` or `fn(double{})` to pick the scalar type at runtime.
template <typename Fn>
decltype(auto) with_precision(Precision p, Fn&& fn) {
    if (p == Precision::f64) {
        return fn(double{});
    }
    return fn(float{});
}

} // namespace drin
