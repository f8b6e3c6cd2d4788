#include "drin/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

#include "drin/error.hpp"

namespace drin {

namespace fs = std::filesystem;

nlohmann::ordered_json to_json(const EpochLog& log, std::span<const int> ks) {
    nlohmann::ordered_json j;
    j["epoch"] = log.epoch;
    j["train_loss"] = log.train_loss;
    j["val_count"] = log.val_count;
    j["val"] = log.val_metrics.empty() ? nlohmann::ordered_json::object() : metrics_json(log.val_metrics, ks);
    j["seconds"] = log.seconds;
    return j;
}

DataSplit split_records(std::span<const MentionRecord> records, std::uint64_t seed, double val_fraction) {
    DataSplit split;
    const bool tagged = std::any_of(records.begin(), records.end(), [](const MentionRecord& r) {
        return !r.split.empty();
    });
    if (tagged) {
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (records[i].split == "val") {
                split.val.push_back(i);
            } else if (records[i].split != "test") {
                split.train.push_back(i);
            }
        }
        return split;
    }

    const std::size_t n = records.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::seed_seq seq{seed, std::uint64_t{0x5eed}};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * val_fraction));
    if (val_fraction > 0.0 && n >= 2) {
        n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
    }
    split.val.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    std::sort(split.val.begin(), split.val.end());
    std::sort(split.train.begin(), split.train.end());
    return split;
}

void check_compatible(const ModelShape& shape, const BundleHeader& header) {
    if (shape.text_dim != header.text_dim || shape.image_dim != header.image_dim) {
        throw ConfigError("model expects text_dim " + std::to_string(shape.text_dim) + " and image_dim " +
                          std::to_string(shape.image_dim) + " but the bundle has " +
                          std::to_string(header.text_dim) + " and " + std::to_string(header.image_dim));
    }
}

template <typename T>
TrainState<T> init_state(const TrainConfig& config, const BundleHeader& header,
                         std::optional<std::uint64_t> split_seed) {
    validate(config);
    TrainState<T> st;
    st.config = config;
    st.split_seed = split_seed.value_or(config.seed);
    st.rng.seed(config.seed);
    st.model = ModelParams<T>::init(config.model_shape(header.text_dim, header.image_dim), st.rng);
    return st;
}

namespace {

template <typename T>
EvalReport evaluate_indices(std::span<const MentionRecord> records, std::span<const std::size_t> indices,
                            const ModelParams<T>& model, std::span<const int> ks, std::size_t jobs,
                            const std::vector<EdgeInit>* edges) {
    EvalReport report;
    report.rankings.resize(indices.size());
    std::exception_ptr failure;
    const int threads = static_cast<int>(std::max<std::size_t>(jobs, 1));
#pragma omp parallel for schedule(dynamic) num_threads(threads) if (threads > 1)
    for (std::size_t n = 0; n < indices.size(); ++n) {
        try {
            const MentionRecord& rec = records[indices[n]];
            const EdgeInit* e = edges != nullptr ? &(*edges)[indices[n]] : nullptr;
            report.rankings[n] = make_ranking(rec.sample_id, score_record(rec, model, e), rec.gold_index, ks);
        } catch (...) {
#pragma omp critical(drin_eval_failure)
            if (!failure) {
                failure = std::current_exception();
            }
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
    report.metrics = topk_accuracy(report.rankings, ks);
    return report;
}

} // namespace

template <typename T>
EvalReport evaluate(std::span<const MentionRecord> records, const ModelParams<T>& model, std::span<const int> ks,
                    std::size_t jobs) {
    std::vector<std::size_t> all(records.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return evaluate_indices(records, all, model, ks, jobs, nullptr);
}

template <typename T>
TrainResult<T> resume(const Bundle& bundle, TrainState<T> st, const TrainOptions& options) {
    const TrainConfig& cfg = st.config;
    validate(cfg);
    check_compatible(st.model.shape(), bundle.header);
    const std::vector<MentionRecord>& records = bundle.records;

    const DataSplit split = split_records(records, st.split_seed, cfg.val_fraction);
    std::vector<std::size_t> trainable;
    for (std::size_t i : split.train) {
        if (records[i].candidates.size() >= 2) {
            trainable.push_back(i);
        }
    }
    if (trainable.empty()) {
        throw ValidationError("no training mention with at least two candidates");
    }

    std::vector<EdgeInit> edges;
    edges.reserve(records.size());
    for (const MentionRecord& rec : records) {
        edges.push_back(initial_edges(rec));
    }

    if (options.out_dir) {
        fs::create_directories(*options.out_dir);
    }

    const AdamHyper hp{cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon};
    const T margin = static_cast<T>(cfg.margin);
    const std::vector<Parameter<T>*> params = st.model.parameters();

    TrainResult<T> result;
    while (st.epoch < cfg.epochs) {
        const auto start = std::chrono::steady_clock::now();
        // each epoch permutes the same base order so a resumed run sees the same batches
        std::vector<std::size_t> order = trainable;
        std::shuffle(order.begin(), order.end(), st.rng);
        double epoch_loss = 0.0;
        for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), b + cfg.batch_size);
            st.model.zero_grad();
            for (std::size_t n = b; n < end; ++n) {
                const MentionRecord& rec = records[order[n]];
                Tape<T> tape;
                const ForwardResult<T> f = forward(tape, rec, st.model, &edges[order[n]]);
                const ScoredMention sm{f.scores, rec.gold_index};
                const Var loss = margin_loss(tape, std::span<const ScoredMention>(&sm, 1), margin);
                const double value = static_cast<double>(tape.value(loss).item());
                if (!std::isfinite(value)) {
                    throw DivergenceError("loss became non-finite at epoch " + std::to_string(st.epoch + 1) +
                                          ", step " + std::to_string(st.adam.step + 1) + " (sample '" +
                                          rec.sample_id + "')");
                }
                tape.backward(loss);
                epoch_loss += value;
            }
            adam_step(std::span<Parameter<T>* const>(params), st.adam, hp, st.adam.step + 1);
        }
        ++st.epoch;

        EpochLog log;
        log.epoch = st.epoch;
        log.train_loss = epoch_loss / static_cast<double>(trainable.size());
        log.val_count = split.val.size();
        if (!split.val.empty()) {
            log.val_metrics = evaluate_indices<T>(records, split.val, st.model, cfg.ks, cfg.jobs, &edges).metrics;
        }
        log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        spdlog::info("epoch {} loss {:.6f} val top1 {:.4f} ({:.2f}s)", log.epoch, log.train_loss,
                     log.val_metrics.empty() ? 0.0 : log.val_metrics.begin()->second, log.seconds);

        if (options.out_dir) {
            save_checkpoint(st, *options.out_dir / "checkpoint");
            std::ofstream metrics(*options.out_dir / "metrics.jsonl", std::ios::app);
            metrics << to_json(log, cfg.ks).dump() << '\n';
            if (!metrics) {
                throw IoError("cannot append to " + (*options.out_dir / "metrics.jsonl").string());
            }
        }
        if (options.on_epoch) {
            options.on_epoch(log);
        }
        result.log.push_back(std::move(log));
    }
    result.state = std::move(st);
    return result;
}

template <typename T>
TrainResult<T> train(const Bundle& bundle, const TrainConfig& config, const TrainOptions& options) {
    if (options.out_dir) {
        std::error_code ec;
        fs::remove(*options.out_dir / "metrics.jsonl", ec);
    }
    return resume<T>(bundle, init_state<T>(config, bundle.header), options);
}

template <typename T>
std::vector<SweepRow> layer_sweep(const Bundle& bundle, const TrainConfig& config,
                                  std::span<const std::size_t> layer_values) {
    if (layer_values.empty()) {
        throw ContractError("layer_sweep: no layer values given");
    }
    validate(config);
    std::vector<SweepRow> rows;
    for (std::size_t layers : layer_values) {
        SweepRow row;
        row.layers = layers;
        row.runs = config.runs;
        std::map<int, std::vector<double>> samples;
        for (std::size_t run = 0; run < config.runs; ++run) {
            TrainConfig cfg = config;
            cfg.gcn_layers = layers;
            cfg.seed = config.seed + run;
            TrainState<T> st = init_state<T>(cfg, bundle.header, config.seed);
            const TrainResult<T> res = resume<T>(bundle, std::move(st));
            for (const auto& [k, v] : res.log.back().val_metrics) {
                samples[k].push_back(v);
            }
        }
        for (const auto& [k, vs] : samples) {
            const double mean = std::accumulate(vs.begin(), vs.end(), 0.0) / static_cast<double>(vs.size());
            double ss = 0.0;
            for (double v : vs) {
                ss += (v - mean) * (v - mean);
            }
            row.mean[k] = mean;
            row.stddev[k] = vs.size() > 1 ? std::sqrt(ss / static_cast<double>(vs.size() - 1)) : 0.0;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string sweep_table(std::span<const SweepRow> rows, std::span<const int> ks) {
    const bool with_std = std::any_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.runs > 1; });
    const int width = with_std ? 17 : 9;
    std::ostringstream os;
    char cell[64];
    std::snprintf(cell, sizeof cell, "%3s", "L");
    os << cell;
    for (int k : ks) {
        std::snprintf(cell, sizeof cell, "%*s", width, ("Top-" + std::to_string(k)).c_str());
        os << cell;
    }
    os << '\n';
    for (const SweepRow& r : rows) {
        std::snprintf(cell, sizeof cell, "%3zu", r.layers);
        os << cell;
        for (int k : ks) {
            const auto it = r.mean.find(k);
            const double m = it == r.mean.end() ? 0.0 : it->second;
            if (with_std) {
                std::snprintf(cell, sizeof cell, "%9.4f+-%6.4f", m, r.stddev.count(k) ? r.stddev.at(k) : 0.0);
            } else {
                std::snprintf(cell, sizeof cell, "%9.4f", m);
            }
            os << cell;
        }
        os << '\n';
    }
    return os.str();
}

template TrainState<float> init_state<float>(const TrainConfig&, const BundleHeader&, std::optional<std::uint64_t>);
template TrainState<double> init_state<double>(const TrainConfig&, const BundleHeader&,
                                               std::optional<std::uint64_t>);
template TrainResult<float> train<float>(const Bundle&, const TrainConfig&, const TrainOptions&);
template TrainResult<double> train<double>(const Bundle&, const TrainConfig&, const TrainOptions&);
template TrainResult<float> resume<float>(const Bundle&, TrainState<float>, const TrainOptions&);
template TrainResult<double> resume<double>(const Bundle&, TrainState<double>, const TrainOptions&);
template EvalReport evaluate<float>(std::span<const MentionRecord>, const ModelParams<float>&, std::span<const int>,
                                    std::size_t);
template EvalReport evaluate<double>(std::span<const MentionRecord>, const ModelParams<double>&,
                                     std::span<const int>, std::size_t);
template std::vector<SweepRow> layer_sweep<float>(const Bundle&, const TrainConfig&, std::span<const std::size_t>);
template std::vector<SweepRow> layer_sweep<double>(const Bundle&, const TrainConfig&, std::span<const std::size_t>);

} // namespace drin
