#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "drin/model.hpp"
#include "drin/tape.hpp"

namespace drin {

enum class Precision { f32, f64 };

std::string to_string(Precision p);
Precision parse_precision(const std::string& name);

/// Training hyperparameters. Defaults: d = 768,
/// two layers, batch 64, Adam with lr 1e-3, margin 0.25, 30 epochs.
struct TrainConfig {
    std::size_t hidden_dim = 768;
    std::size_t edge_dim = 0; // 0 means "same as hidden_dim"
    std::size_t gcn_layers = 2;
    std::size_t batch_size = 64;
    double learning_rate = 0.001;
    double margin = 0.25;
    std::size_t epochs = 30;
    std::uint64_t seed = 42;
    Activation activation = Activation::tanh;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    Precision precision = Precision::f32;
    double val_fraction = 0.1;
    std::vector<int> ks{1, 5, 10, 20};
    std::size_t jobs = 1;
    std::size_t runs = 1;

    std::size_t effective_edge_dim() const { return edge_dim == 0 ? hidden_dim : edge_dim; }
    ModelShape model_shape(std::size_t text_dim, std::size_t image_dim) const;

    bool operator==(const TrainConfig&) const = default;
};

/// Throws ConfigError on the first out-of-range field.
void validate(const TrainConfig& config);

nlohmann::ordered_json to_json(const TrainConfig& config);

/// Applies the keys present in `j` on top of `base`. Unknown keys and
/// mistyped values are rejected with ConfigError.
TrainConfig config_from_json(const nlohmann::json& j, TrainConfig base = {});
TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {});

/// Applies one "key=value" override, type-checked against the key.
void apply_override(TrainConfig& config, const std::string& assignment);

/// Key, default value and description for every config key, in declaration order.
struct ConfigKeyDoc {
    std::string key;
    std::string default_value;
    std::string description;
};
std::vector<ConfigKeyDoc> config_key_docs();

std::vector<int> parse_int_list(const std::string& text);

} // namespace drin
