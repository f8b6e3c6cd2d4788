#include "drin/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include "drin/error.hpp"

namespace drin {

using json = nlohmann::json;

std::string to_string(Precision p) {
    return p == Precision::f32 ? "f32" : "f64";
}

Precision parse_precision(const std::string& name) {
    if (name == "f32") {
        return Precision::f32;
    }
    if (name == "f64") {
        return Precision::f64;
    }
    throw ConfigError("unknown precision '" + name + "' (expected f32 or f64)");
}

ModelShape TrainConfig::model_shape(std::size_t text_dim, std::size_t image_dim) const {
    ModelShape s;
    s.text_dim = text_dim;
    s.image_dim = image_dim;
    s.hidden_dim = hidden_dim;
    s.edge_dim = effective_edge_dim();
    s.layers = gcn_layers;
    s.activation = activation;
    return s;
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(item, &used);
        } catch (const std::exception&) {
            throw ConfigError("'" + text + "' is not a comma-separated list of integers");
        }
        if (used != item.size()) {
            throw ConfigError("'" + text + "' is not a comma-separated list of integers");
        }
        out.push_back(v);
    }
    if (out.empty()) {
        throw ConfigError("empty integer list");
    }
    return out;
}

namespace {

std::size_t parse_count(const std::string& key, const std::string& text) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
        if (!text.empty() && text[0] == '-') {
            throw std::invalid_argument("negative");
        }
        v = std::stoull(text, &used);
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' expects a non-negative integer, got '" + text + "'");
    }
    if (used != text.size()) {
        throw ConfigError("config key '" + key + "' expects a non-negative integer, got '" + text + "'");
    }
    return static_cast<std::size_t>(v);
}

double parse_real(const std::string& key, const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' expects a number, got '" + text + "'");
    }
    if (used != text.size()) {
        throw ConfigError("config key '" + key + "' expects a number, got '" + text + "'");
    }
    return v;
}

std::size_t json_count(const std::string& key, const json& j) {
    if (!j.is_number_integer() || j.get<long long>() < 0) {
        throw ConfigError("config key '" + key + "' expects a non-negative integer, got " + j.dump());
    }
    return j.get<std::size_t>();
}

double json_real(const std::string& key, const json& j) {
    if (!j.is_number()) {
        throw ConfigError("config key '" + key + "' expects a number, got " + j.dump());
    }
    return j.get<double>();
}

std::string json_string(const std::string& key, const json& j) {
    if (!j.is_string()) {
        throw ConfigError("config key '" + key + "' expects a string, got " + j.dump());
    }
    return j.get<std::string>();
}

struct KeySpec {
    std::string key;
    std::string description;
    std::function<void(TrainConfig&, const json&)> from_json;
    std::function<void(TrainConfig&, const std::string&)> from_text;
    std::function<json(const TrainConfig&)> to_json;
};

template <typename Member>
KeySpec count_key(std::string key, std::string doc, Member member) {
    return {key, std::move(doc),
            [key, member](TrainConfig& c, const json& j) { c.*member = json_count(key, j); },
            [key, member](TrainConfig& c, const std::string& s) { c.*member = parse_count(key, s); },
            [member](const TrainConfig& c) { return json(c.*member); }};
}

KeySpec real_key(std::string key, std::string doc, double TrainConfig::*member) {
    return {key, std::move(doc), [key, member](TrainConfig& c, const json& j) { c.*member = json_real(key, j); },
            [key, member](TrainConfig& c, const std::string& s) { c.*member = parse_real(key, s); },
            [member](const TrainConfig& c) { return json(c.*member); }};
}

const std::vector<KeySpec>& key_specs() {
    static const std::vector<KeySpec> specs = [] {
        std::vector<KeySpec> v;
        v.push_back(count_key("hidden_dim", "vertex feature dimension d", &TrainConfig::hidden_dim));
        v.push_back(count_key("edge_dim", "edge projection dimension (0 = hidden_dim)", &TrainConfig::edge_dim));
        v.push_back(count_key("gcn_layers", "number of dynamic GCN layers L", &TrainConfig::gcn_layers));
        v.push_back(count_key("batch_size", "mentions per optimizer step", &TrainConfig::batch_size));
        v.push_back(real_key("learning_rate", "Adam learning rate", &TrainConfig::learning_rate));
        v.push_back(real_key("margin", "ranking loss margin", &TrainConfig::margin));
        v.push_back(count_key("epochs", "training epochs", &TrainConfig::epochs));
        v.push_back(count_key("seed", "seed for init, split and shuffling", &TrainConfig::seed));
        v.push_back({"activation", "tanh or leaky_relu",
                     [](TrainConfig& c, const json& j) { c.activation = parse_activation(json_string("activation", j)); },
                     [](TrainConfig& c, const std::string& s) { c.activation = parse_activation(s); },
                     [](const TrainConfig& c) { return json(to_string(c.activation)); }});
        v.push_back(real_key("adam_beta1", "Adam first-moment decay", &TrainConfig::adam_beta1));
        v.push_back(real_key("adam_beta2", "Adam second-moment decay", &TrainConfig::adam_beta2));
        v.push_back(real_key("adam_epsilon", "Adam denominator epsilon", &TrainConfig::adam_epsilon));
        v.push_back({"precision", "f32 or f64",
                     [](TrainConfig& c, const json& j) { c.precision = parse_precision(json_string("precision", j)); },
                     [](TrainConfig& c, const std::string& s) { c.precision = parse_precision(s); },
                     [](const TrainConfig& c) { return json(to_string(c.precision)); }});
        v.push_back(real_key("val_fraction", "held-out fraction when the bundle has no split tags",
                             &TrainConfig::val_fraction));
        v.push_back({"ks", "Top-K cut-offs reported",
                     [](TrainConfig& c, const json& j) {
                         if (!j.is_array() || j.empty()) {
                             throw ConfigError("config key 'ks' expects a non-empty array of integers");
                         }
                         std::vector<int> ks;
                         for (const json& e : j) {
                             if (!e.is_number_integer()) {
                                 throw ConfigError("config key 'ks' expects integers, got " + e.dump());
                             }
                             ks.push_back(e.get<int>());
                         }
                         c.ks = std::move(ks);
                     },
                     [](TrainConfig& c, const std::string& s) { c.ks = parse_int_list(s); },
                     [](const TrainConfig& c) { return json(c.ks); }});
        v.push_back(count_key("jobs", "evaluation threads", &TrainConfig::jobs));
        v.push_back(count_key("runs", "repetitions per sweep setting (seed, seed+1, ...)", &TrainConfig::runs));
        return v;
    }();
    return specs;
}

const KeySpec& find_key(const std::string& key) {
    for (const KeySpec& s : key_specs()) {
        if (s.key == key) {
            return s;
        }
    }
    throw ConfigError("unknown config key '" + key + "'");
}

} // namespace

void validate(const TrainConfig& c) {
    auto fail = [](const std::string& what) { throw ConfigError("invalid config: " + what); };
    if (c.hidden_dim == 0) fail("hidden_dim must be positive");
    if (c.gcn_layers < 1) fail("gcn_layers must be at least 1");
    if (c.batch_size == 0) fail("batch_size must be positive");
    if (!(c.learning_rate > 0.0)) fail("learning_rate must be positive");
    if (!(c.margin >= 0.0)) fail("margin must be non-negative");
    if (c.epochs == 0) fail("epochs must be positive");
    if (!(c.adam_beta1 >= 0.0 && c.adam_beta1 < 1.0)) fail("adam_beta1 must lie in [0, 1)");
    if (!(c.adam_beta2 >= 0.0 && c.adam_beta2 < 1.0)) fail("adam_beta2 must lie in [0, 1)");
    if (!(c.adam_epsilon > 0.0)) fail("adam_epsilon must be positive");
    if (!(c.val_fraction >= 0.0 && c.val_fraction < 1.0)) fail("val_fraction must lie in [0, 1)");
    if (c.ks.empty()) fail("ks must not be empty");
    for (int k : c.ks) {
        if (k < 1) fail("every K must be at least 1");
    }
    if (c.jobs == 0) fail("jobs must be positive");
    if (c.runs == 0) fail("runs must be positive");
}

nlohmann::ordered_json to_json(const TrainConfig& config) {
    nlohmann::ordered_json j;
    for (const KeySpec& s : key_specs()) {
        j[s.key] = s.to_json(config);
    }
    return j;
}

TrainConfig config_from_json(const json& j, TrainConfig base) {
    if (!j.is_object()) {
        throw ConfigError("config must be a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
        find_key(key).from_json(base, value);
    }
    return base;
}

TrainConfig load_config(const std::filesystem::path& path, TrainConfig base) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("malformed config file " + path.string() + ": " + e.what());
    }
    return config_from_json(j, std::move(base));
}

void apply_override(TrainConfig& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + assignment + "' is not of the form key=value");
    }
    find_key(assignment.substr(0, eq)).from_text(config, assignment.substr(eq + 1));
}

std::vector<ConfigKeyDoc> config_key_docs() {
    const TrainConfig defaults;
    std::vector<ConfigKeyDoc> out;
    for (const KeySpec& s : key_specs()) {
        out.push_back({s.key, s.to_json(defaults).dump(), s.description});
    }
    return out;
}

} // namespace drin
