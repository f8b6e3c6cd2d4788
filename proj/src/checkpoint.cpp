#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "drin/blob.hpp"
#include "drin/error.hpp"
#include "drin/trainer.hpp"

namespace drin {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

template <typename T>
const char* dtype_name() {
    return sizeof(T) == 4 ? "f32" : "f64";
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    out << text;
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
}

json read_header(const fs::path& dir) {
    const json h = read_json(dir / "header.json");
    if (!h.is_object() || h.value("kind", "") != "checkpoint") {
        throw FormatError(dir.string() + " is not a checkpoint (header kind must be \"checkpoint\")");
    }
    if (h.value("format_version", 0) != kFormatVersion) {
        throw FormatError("unsupported checkpoint format_version " + h.value("format_version", json()).dump());
    }
    return h;
}

struct Entry {
    Shape shape;
    std::uint64_t off = 0;
    std::uint64_t len = 0;
};

} // namespace

Precision checkpoint_precision(const fs::path& dir) {
    const json h = read_header(dir);
    if (!h.contains("dtype") || !h["dtype"].is_string()) {
        throw FormatError("checkpoint header has no dtype");
    }
    try {
        return parse_precision(h["dtype"].get<std::string>());
    } catch (const ConfigError& e) {
        throw FormatError(std::string("checkpoint header: ") + e.what());
    }
}

template <typename T>
void save_checkpoint(const TrainState<T>& st, const fs::path& dir) {
    fs::create_directories(dir);

    blob::Writer writer;
    nlohmann::ordered_json manifest = nlohmann::ordered_json::array();
    auto put = [&](const std::string& name, const Tensor<T>& t) {
        const std::uint64_t off = writer.append<T>(std::span<const T>(t.data().data(), t.size()));
        nlohmann::ordered_json e;
        e["name"] = name;
        e["shape"] = t.shape();
        e["off"] = off;
        e["len"] = t.size();
        manifest.push_back(std::move(e));
    };
    const std::vector<const Parameter<T>*> params = st.model.parameters();
    for (const Parameter<T>* p : params) {
        put("param/" + p->name, p->value);
    }
    if (!st.adam.m.empty()) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            put("adam_m/" + params[i]->name, st.adam.m[i]);
            put("adam_v/" + params[i]->name, st.adam.v[i]);
        }
    }

    const ModelShape shape = st.model.shape();
    std::ostringstream rng;
    rng << st.rng;

    nlohmann::ordered_json h;
    h["format_version"] = kFormatVersion;
    h["kind"] = "checkpoint";
    h["dtype"] = dtype_name<T>();
    h["epoch"] = st.epoch;
    h["adam_step"] = st.adam.step;
    h["split_seed"] = st.split_seed;
    h["config"] = to_json(st.config);
    h["shape"] = {{"text_dim", shape.text_dim},   {"image_dim", shape.image_dim}, {"hidden_dim", shape.hidden_dim},
                  {"edge_dim", shape.edge_dim},   {"layers", shape.layers},
                  {"activation", to_string(shape.activation)}};
    h["rng_state"] = rng.str();

    writer.save(dir / "tensors.bin");
    std::string lines;
    for (const auto& e : manifest) {
        lines += e.dump() + "\n";
    }
    write_text(dir / "manifest.jsonl", lines);
    write_text(dir / "header.json", h.dump(2) + "\n");
}

template <typename T>
TrainState<T> load_checkpoint(const fs::path& dir) {
    const json h = read_header(dir);
    if (h.value("dtype", "") != dtype_name<T>()) {
        throw FormatError("checkpoint dtype is " + h.value("dtype", json()).dump() + ", expected " + dtype_name<T>());
    }

    TrainState<T> st;
    ModelShape shape;
    try {
        st.config = config_from_json(h.at("config"));
        st.epoch = h.at("epoch").get<std::size_t>();
        st.adam.step = h.at("adam_step").get<std::uint64_t>();
        st.split_seed = h.at("split_seed").get<std::uint64_t>();
        const json& s = h.at("shape");
        shape.text_dim = s.at("text_dim").get<std::size_t>();
        shape.image_dim = s.at("image_dim").get<std::size_t>();
        shape.hidden_dim = s.at("hidden_dim").get<std::size_t>();
        shape.edge_dim = s.at("edge_dim").get<std::size_t>();
        shape.layers = s.at("layers").get<std::size_t>();
        shape.activation = parse_activation(s.at("activation").get<std::string>());
        std::istringstream rng(h.at("rng_state").get<std::string>());
        rng >> st.rng;
        if (!rng) {
            throw FormatError("checkpoint rng_state is unreadable");
        }
    } catch (const json::exception& e) {
        throw FormatError("checkpoint header: " + std::string(e.what()));
    }

    std::mt19937_64 scratch(0);
    st.model = ModelParams<T>::init(shape, scratch);

    std::map<std::string, Entry> entries;
    {
        std::ifstream in(dir / "manifest.jsonl");
        if (!in) {
            throw IoError("cannot open " + (dir / "manifest.jsonl").string());
        }
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) {
                continue;
            }
            try {
                const json e = json::parse(line);
                Entry entry{e.at("shape").get<Shape>(), e.at("off").get<std::uint64_t>(),
                            e.at("len").get<std::uint64_t>()};
                entries[e.at("name").get<std::string>()] = std::move(entry);
            } catch (const json::exception& ex) {
                throw FormatError("checkpoint manifest line " + std::to_string(lineno) + ": " + ex.what());
            }
        }
    }

    blob::Reader reader(dir / "tensors.bin");
    auto take = [&](const std::string& name, const Shape& expected) {
        const auto it = entries.find(name);
        if (it == entries.end()) {
            throw FormatError("checkpoint is missing tensor '" + name + "'");
        }
        const Entry& e = it->second;
        if (e.shape != expected || e.len != shape_size(expected)) {
            throw FormatError("checkpoint tensor '" + name + "' has shape " + shape_str(e.shape) + ", expected " +
                              shape_str(expected));
        }
        return Tensor<T>(e.shape, reader.read<T>(name, e.off, e.len));
    };

    const std::vector<Parameter<T>*> params = st.model.parameters();
    for (Parameter<T>* p : params) {
        p->value = take("param/" + p->name, p->value.shape());
        p->zero_grad();
    }
    if (entries.count("adam_m/" + params.front()->name) != 0) {
        for (Parameter<T>* p : params) {
            st.adam.m.push_back(take("adam_m/" + p->name, p->value.shape()));
            st.adam.v.push_back(take("adam_v/" + p->name, p->value.shape()));
        }
    }
    return st;
}

template void save_checkpoint<float>(const TrainState<float>&, const fs::path&);
template void save_checkpoint<double>(const TrainState<double>&, const fs::path&);
template TrainState<float> load_checkpoint<float>(const fs::path&);
template TrainState<double> load_checkpoint<double>(const fs::path&);

} // namespace drin
