#include "drin/bundle.hpp"

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "drin/error.hpp"

namespace drin {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

[[noreturn]] void invalid(const std::string& sample_id, const std::string& field, const std::string& why) {
    throw ValidationError("sample '" + sample_id + "': field '" + field + "' " + why);
}

void check_vector(const std::string& sample_id, const std::string& field, const std::vector<float>& v,
                  std::size_t expected) {
    if (v.size() != expected) {
        invalid(sample_id, field,
                "has length " + std::to_string(v.size()) + ", expected " + std::to_string(expected));
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) {
            invalid(sample_id, field, "has non-finite element at index " + std::to_string(i));
        }
    }
}

void check_objects(const std::string& sample_id, const std::string& field, const std::vector<ObjectRegion>& objs,
                   std::size_t dim) {
    for (std::size_t i = 0; i < objs.size(); ++i) {
        const std::string f = field + "[" + std::to_string(i) + "]";
        check_vector(sample_id, f + ".feature", objs[i].feature, dim);
        const float s = objs[i].score;
        if (!(s > 0.0f && s <= 1.0f)) {
            invalid(sample_id, f + ".score", "is " + std::to_string(s) + ", expected a value in (0, 1]");
        }
    }
}

void check_clip(const std::string& sample_id, const std::string& field, float v) {
    if (!(v >= -1.0f && v <= 1.0f)) {
        invalid(sample_id, field, "is " + std::to_string(v) + ", expected a value in [-1, 1]");
    }
}

} // namespace

void validate_header(const BundleHeader& header) {
    if (header.format_version != kBundleFormatVersion) {
        throw ValidationError("header: unsupported format_version " + std::to_string(header.format_version));
    }
    if (header.text_dim == 0 || header.image_dim == 0 || header.object_dim == 0) {
        throw ValidationError("header: dimensions must be positive");
    }
}

void validate_record(const BundleHeader& header, const MentionRecord& rec) {
    const std::string& id = rec.sample_id;
    if (id.empty()) {
        throw ValidationError("record: field 'sample_id' is empty");
    }
    check_vector(id, "span_pooled_vec", rec.span_pooled_vec, header.text_dim);
    check_vector(id, "cls_vec", rec.cls_vec, header.text_dim);
    check_vector(id, "img_vec", rec.img_vec, header.image_dim);
    check_objects(id, "objects", rec.objects, header.object_dim);
    if (rec.candidates.empty()) {
        invalid(id, "candidates", "is empty, expected at least one candidate");
    }
    if (rec.gold_index >= rec.candidates.size()) {
        invalid(id, "gold_index",
                "is " + std::to_string(rec.gold_index) + ", expected < " + std::to_string(rec.candidates.size()));
    }
    if (!rec.split.empty() && rec.split != "train" && rec.split != "val" && rec.split != "test") {
        invalid(id, "split", "is '" + rec.split + "', expected train, val or test");
    }
    for (std::size_t i = 0; i < rec.candidates.size(); ++i) {
        const CandidateRecord& c = rec.candidates[i];
        const std::string f = "candidates[" + std::to_string(i) + "]";
        if (c.entity_id.empty()) {
            invalid(id, f + ".entity_id", "is empty");
        }
        check_vector(id, f + ".cls_vec", c.cls_vec, header.text_dim);
        check_vector(id, f + ".img_vec", c.img_vec, header.image_dim);
        check_objects(id, f + ".objects", c.objects, header.object_dim);
        check_clip(id, f + ".clip_text_to_image", c.clip_text_to_image);
        check_clip(id, f + ".clip_image_to_text", c.clip_image_to_text);
    }
}

// ---------------------------------------------------------------------------
// Reading

namespace {

BundleHeader parse_header(const fs::path& dir) {
    const fs::path path = dir / "header.json";
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    BundleHeader h;
    try {
        const json j = json::parse(in);
        h.format_version = j.at("format_version").get<int>();
        h.text_dim = j.at("text_dim").get<std::size_t>();
        h.image_dim = j.at("image_dim").get<std::size_t>();
        h.object_dim = j.at("object_dim").get<std::size_t>();
        h.sample_count = j.at("sample_count").get<std::size_t>();
    } catch (const json::exception& e) {
        throw FormatError("malformed " + path.string() + ": " + e.what());
    }
    try {
        validate_header(h);
    } catch (const ValidationError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return h;
}

struct BlobRef {
    std::uint64_t off;
    std::uint64_t len;
};

BlobRef parse_ref(const json& j) {
    return {j.at("off").get<std::uint64_t>(), j.at("len").get<std::uint64_t>()};
}

} // namespace

BundleHeader read_bundle_header(const fs::path& dir) {
    return parse_header(dir);
}

BundleReader::BundleReader(const fs::path& dir) : dir_(dir), header_(parse_header(dir)) {
    const fs::path manifest = dir / "manifest.jsonl";
    manifest_.open(manifest);
    if (!manifest_) {
        throw IoError("cannot open " + manifest.string());
    }
    tensors_ = blob::Reader(dir / "tensors.bin");
}

std::optional<MentionRecord> BundleReader::next() {
    std::string line;
    while (std::getline(manifest_, line)) {
        ++line_no_;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        if (yielded_ >= header_.sample_count) {
            throw FormatError("manifest has more records than header sample_count " +
                              std::to_string(header_.sample_count));
        }
        MentionRecord rec;
        const std::string where = "manifest.jsonl line " + std::to_string(line_no_);
        try {
            const json j = json::parse(line);
            rec.sample_id = j.at("sample_id").get<std::string>();
            const std::string& id = rec.sample_id;
            if (j.contains("split")) {
                rec.split = j.at("split").get<std::string>();
            }

            auto vec = [&](const json& parent, const std::string& key, const std::string& field,
                           std::size_t dim) {
                const BlobRef ref = parse_ref(parent.at(key));
                if (ref.len != dim) {
                    invalid(id, field, "has length " + std::to_string(ref.len) + ", expected " + std::to_string(dim));
                }
                return tensors_.read<float>("sample '" + id + "' field '" + field + "'", ref.off, ref.len);
            };
            auto objects = [&](const json& parent, const std::string& field) {
                std::vector<ObjectRegion> out;
                const json& arr = parent.at("objects");
                for (std::size_t i = 0; i < arr.size(); ++i) {
                    const std::string f = field + "[" + std::to_string(i) + "]";
                    ObjectRegion o;
                    const BlobRef ref = parse_ref(arr[i]);
                    if (ref.len != header_.object_dim) {
                        invalid(id, f + ".feature",
                                "has length " + std::to_string(ref.len) + ", expected " +
                                    std::to_string(header_.object_dim));
                    }
                    o.feature = tensors_.read<float>("sample '" + id + "' field '" + f + ".feature'", ref.off, ref.len);
                    o.score = arr[i].at("score").get<float>();
                    out.push_back(std::move(o));
                }
                return out;
            };

            rec.span_pooled_vec = vec(j, "span_pooled_vec", "span_pooled_vec", header_.text_dim);
            rec.cls_vec = vec(j, "cls_vec", "cls_vec", header_.text_dim);
            rec.img_vec = vec(j, "img_vec", "img_vec", header_.image_dim);
            rec.objects = objects(j, "objects");
            rec.gold_index = j.at("gold_index").get<std::size_t>();
            const json& cands = j.at("candidates");
            for (std::size_t i = 0; i < cands.size(); ++i) {
                const json& cj = cands[i];
                const std::string f = "candidates[" + std::to_string(i) + "]";
                CandidateRecord c;
                c.entity_id = cj.at("entity_id").get<std::string>();
                c.cls_vec = vec(cj, "cls_vec", f + ".cls_vec", header_.text_dim);
                c.img_vec = vec(cj, "img_vec", f + ".img_vec", header_.image_dim);
                c.objects = objects(cj, f + ".objects");
                c.clip_text_to_image = cj.at("clip_text_to_image").get<float>();
                c.clip_image_to_text = cj.at("clip_image_to_text").get<float>();
                rec.candidates.push_back(std::move(c));
            }
        } catch (const json::exception& e) {
            throw FormatError(where + ": " + e.what());
        }
        validate_record(header_, rec);
        ++yielded_;
        return rec;
    }
    if (yielded_ != header_.sample_count) {
        throw FormatError("manifest has " + std::to_string(yielded_) + " records but header sample_count is " +
                          std::to_string(header_.sample_count));
    }
    return std::nullopt;
}

Bundle read_bundle(const fs::path& dir) {
    BundleReader reader(dir);
    Bundle b;
    b.header = reader.header();
    b.records.reserve(b.header.sample_count);
    while (auto rec = reader.next()) {
        b.records.push_back(std::move(*rec));
    }
    return b;
}

// ---------------------------------------------------------------------------
// Writing

namespace {

ordered_json ref_json(blob::Writer& w, const std::vector<float>& v) {
    ordered_json j;
    j["off"] = w.append<float>(v);
    j["len"] = v.size();
    return j;
}

ordered_json objects_json(blob::Writer& w, const std::vector<ObjectRegion>& objs) {
    ordered_json arr = ordered_json::array();
    for (const ObjectRegion& o : objs) {
        ordered_json j = ref_json(w, o.feature);
        j["score"] = o.score;
        arr.push_back(std::move(j));
    }
    return arr;
}

} // namespace

void write_bundle(const BundleHeader& header, const std::vector<MentionRecord>& records, const fs::path& dir) {
    validate_header(header);
    if (header.sample_count != records.size()) {
        throw ValidationError("header sample_count " + std::to_string(header.sample_count) + " but " +
                              std::to_string(records.size()) + " records given");
    }
    for (const MentionRecord& rec : records) {
        validate_record(header, rec);
    }

    blob::Writer tensors;
    std::string manifest;
    for (const MentionRecord& rec : records) {
        ordered_json j;
        j["sample_id"] = rec.sample_id;
        if (!rec.split.empty()) {
            j["split"] = rec.split;
        }
        j["span_pooled_vec"] = ref_json(tensors, rec.span_pooled_vec);
        j["cls_vec"] = ref_json(tensors, rec.cls_vec);
        j["img_vec"] = ref_json(tensors, rec.img_vec);
        j["objects"] = objects_json(tensors, rec.objects);
        j["gold_index"] = rec.gold_index;
        ordered_json cands = ordered_json::array();
        for (const CandidateRecord& c : rec.candidates) {
            ordered_json cj;
            cj["entity_id"] = c.entity_id;
            cj["cls_vec"] = ref_json(tensors, c.cls_vec);
            cj["img_vec"] = ref_json(tensors, c.img_vec);
            cj["objects"] = objects_json(tensors, c.objects);
            cj["clip_text_to_image"] = c.clip_text_to_image;
            cj["clip_image_to_text"] = c.clip_image_to_text;
            cands.push_back(std::move(cj));
        }
        j["candidates"] = std::move(cands);
        manifest += j.dump();
        manifest += '\n';
    }

    ordered_json hj;
    hj["format_version"] = header.format_version;
    hj["text_dim"] = header.text_dim;
    hj["image_dim"] = header.image_dim;
    hj["object_dim"] = header.object_dim;
    hj["sample_count"] = header.sample_count;

    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create " + dir.string() + ": " + ec.message());
    }
    {
        std::ofstream out(dir / "header.json", std::ios::trunc);
        out << hj.dump(2) << '\n';
        if (!out) {
            throw IoError("write failed for " + (dir / "header.json").string());
        }
    }
    {
        std::ofstream out(dir / "manifest.jsonl", std::ios::binary | std::ios::trunc);
        out << manifest;
        if (!out) {
            throw IoError("write failed for " + (dir / "manifest.jsonl").string());
        }
    }
    tensors.save(dir / "tensors.bin");
}

void write_bundle(const Bundle& bundle, const fs::path& dir) {
    write_bundle(bundle.header, bundle.records, dir);
}

// ---------------------------------------------------------------------------
// Synthetic data

namespace {

class SynthRng {
public:
    explicit SynthRng(std::uint64_t seed) : engine_(seed) {}

    std::vector<double> unit(std::size_t dim) {
        std::vector<double> v(dim);
        for (double& x : v) {
            x = normal_(engine_);
        }
        normalize(v);
        return v;
    }

    static void normalize(std::vector<double>& v) {
        double n2 = 0.0;
        for (double x : v) {
            n2 += x * x;
        }
        const double inv = 1.0 / std::sqrt(n2);
        for (double& x : v) {
            x *= inv;
        }
    }

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
    double normal(double mean, double sd) { return mean + sd * normal_(engine_); }
    std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Feature space of one modality. With a basis, unit vectors are drawn from
/// its span; without one they are isotropic.
class Space {
public:
    Space(SynthRng& rng, std::size_t dim, std::size_t latent) : dim_(dim) {
        if (latent > 0 && latent < dim) {
            for (std::size_t i = 0; i < latent; ++i) {
                basis_.push_back(rng.unit(dim));
            }
        }
    }

    std::size_t dim() const { return dim_; }

    std::vector<double> unit(SynthRng& rng) const {
        if (basis_.empty()) {
            return rng.unit(dim_);
        }
        const std::vector<double> z = rng.unit(basis_.size());
        std::vector<double> v(dim_, 0.0);
        for (std::size_t i = 0; i < basis_.size(); ++i) {
            for (std::size_t j = 0; j < dim_; ++j) {
                v[j] += z[i] * basis_[i][j];
            }
        }
        SynthRng::normalize(v);
        return v;
    }

private:
    std::size_t dim_;
    std::vector<std::vector<double>> basis_;
};

std::vector<float> to_float(const std::vector<double>& v) {
    return std::vector<float>(v.begin(), v.end());
}

/// normalize(s * anchor + (1 - s) * noise); noise is a fresh unit vector of `space`.
std::vector<double> planted(SynthRng& rng, const Space& space, const std::vector<double>& anchor, double s) {
    std::vector<double> noise = space.unit(rng);
    double n2 = 0.0;
    for (std::size_t i = 0; i < noise.size(); ++i) {
        noise[i] = s * anchor[i] + (1.0 - s) * noise[i];
        n2 += noise[i] * noise[i];
    }
    const double inv = 1.0 / std::sqrt(n2);
    for (double& x : noise) {
        x *= inv;
    }
    return noise;
}

float clip_score(SynthRng& rng, double mean) {
    return static_cast<float>(std::clamp(rng.normal(mean, 0.1), -1.0, 1.0));
}

float object_score(SynthRng& rng) {
    return static_cast<float>(rng.uniform(0.05, 1.0));
}

} // namespace

Bundle generate_synthetic(const SynthConfig& cfg) {
    if (cfg.r < 2) {
        throw ValidationError("synthetic config: r must be at least 2, got " + std::to_string(cfg.r));
    }
    if (!(cfg.signal_strength >= 0.0 && cfg.signal_strength <= 1.0)) {
        throw ValidationError("synthetic config: signal_strength must lie in [0, 1]");
    }
    if (cfg.text_dim == 0 || cfg.image_dim == 0 || cfg.object_dim == 0) {
        throw ValidationError("synthetic config: dimensions must be positive");
    }

    const double s = cfg.signal_strength;
    SynthRng rng(cfg.seed);
    const Space text_space(rng, cfg.text_dim, cfg.latent_dim);
    const Space image_space(rng, cfg.image_dim, cfg.latent_dim);
    const Space object_space(rng, cfg.object_dim, cfg.latent_dim);
    Bundle b;
    b.header.text_dim = cfg.text_dim;
    b.header.image_dim = cfg.image_dim;
    b.header.object_dim = cfg.object_dim;
    b.header.sample_count = cfg.num_samples;
    b.records.reserve(cfg.num_samples);

    for (std::size_t n = 0; n < cfg.num_samples; ++n) {
        MentionRecord rec;
        char id[32];
        std::snprintf(id, sizeof id, "S%06zu", n);
        rec.sample_id = id;

        const std::vector<double> text = text_space.unit(rng);
        const std::vector<double> image = image_space.unit(rng);
        rec.span_pooled_vec = to_float(text);
        rec.cls_vec = to_float(planted(rng, text_space, text, 0.5));
        rec.img_vec = to_float(image);
        std::vector<std::vector<double>> objs;
        for (std::size_t o = 0; o < cfg.k; ++o) {
            objs.push_back(object_space.unit(rng));
            rec.objects.push_back({to_float(objs.back()), object_score(rng)});
        }

        rec.gold_index = rng.index(cfg.r);
        for (std::size_t i = 0; i < cfg.r; ++i) {
            const bool gold = i == rec.gold_index;
            const double si = gold ? s : 0.0;
            CandidateRecord c;
            c.entity_id = std::string(id) + "_E" + std::to_string(i);
            c.cls_vec = to_float(planted(rng, text_space, text, si));
            c.img_vec = to_float(planted(rng, image_space, image, si));
            for (std::size_t o = 0; o < cfg.k; ++o) {
                c.objects.push_back({to_float(planted(rng, object_space, objs[o], si)), object_score(rng)});
            }
            c.clip_text_to_image = clip_score(rng, si);
            c.clip_image_to_text = clip_score(rng, si);
            rec.candidates.push_back(std::move(c));
        }
        b.records.push_back(std::move(rec));
    }
    return b;
}

} // namespace drin
