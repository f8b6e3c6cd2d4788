#pragma once

// Embedding bundle: the on-disk hand-off between the encoder pipeline and the
// ranking engine. A bundle is a directory holding
//
//   header.json     {"format_version", "text_dim", "image_dim", "object_dim", "sample_count"}
//   tensors.bin     raw little-endian float32 arrays, back to back, no padding
//   manifest.jsonl  one JSON object per sample; vectors are {"off": byte offset, "len": count}
//
// Vectors are stored before projection, at encoder width.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "drin/blob.hpp"

namespace drin {

inline constexpr int kBundleFormatVersion = 1;

struct ObjectRegion {
    std::vector<float> feature;
    float score = 1.0f; // detector confidence in (0, 1]

    bool operator==(const ObjectRegion&) const = default;
};

struct CandidateRecord {
    std::string entity_id;
    std::vector<float> cls_vec;
    std::vector<float> img_vec;
    std::vector<ObjectRegion> objects;
    float clip_text_to_image = 0.0f; // mention text vs entity image, cosine in [-1, 1]
    float clip_image_to_text = 0.0f; // mention image vs entity text, cosine in [-1, 1]

    bool operator==(const CandidateRecord&) const = default;
};

struct MentionRecord {
    std::string sample_id;
    std::vector<float> span_pooled_vec; // mean of mention-token features
    std::vector<float> cls_vec;         // sentence first-token feature
    std::vector<float> img_vec;
    std::vector<ObjectRegion> objects;
    std::vector<CandidateRecord> candidates;
    std::size_t gold_index = 0;
    std::string split; // optional: "train", "val" or "test"

    bool operator==(const MentionRecord&) const = default;
};

struct BundleHeader {
    int format_version = kBundleFormatVersion;
    std::size_t text_dim = 768;
    std::size_t image_dim = 2048;
    std::size_t object_dim = 2048;
    std::size_t sample_count = 0;

    bool operator==(const BundleHeader&) const = default;
};

struct Bundle {
    BundleHeader header;
    std::vector<MentionRecord> records;
};

/// Throws ValidationError naming the sample and field on the first broken
/// invariant.
void validate_header(const BundleHeader& header);
void validate_record(const BundleHeader& header, const MentionRecord& record);

/// Streams records in file order, validating each one as it is read.
class BundleReader {
public:
    explicit BundleReader(const std::filesystem::path& dir);

    const BundleHeader& header() const noexcept { return header_; }

    /// Next record, or nullopt at the end. Throws FormatError if the manifest
    /// length disagrees with header.sample_count.
    std::optional<MentionRecord> next();

private:
    std::filesystem::path dir_;
    BundleHeader header_;
    std::ifstream manifest_;
    blob::Reader tensors_;
    std::size_t line_no_ = 0;
    std::size_t yielded_ = 0;
};

Bundle read_bundle(const std::filesystem::path& dir);
BundleHeader read_bundle_header(const std::filesystem::path& dir);

/// Validates everything before touching the filesystem. `header.sample_count`
/// must equal `records.size()`. Output bytes depend only on the inputs.
void write_bundle(const BundleHeader& header, const std::vector<MentionRecord>& records,
                  const std::filesystem::path& dir);
void write_bundle(const Bundle& bundle, const std::filesystem::path& dir);

struct SynthConfig {
    std::size_t num_samples = 100;
    std::size_t r = 8;
    std::size_t k = 5;
    double signal_strength = 0.9;
    std::uint64_t seed = 42;
    std::size_t text_dim = 768;
    std::size_t image_dim = 2048;
    std::size_t object_dim = 2048;
    /// Rank of the subspace each modality's vectors are drawn from; 0 draws
    /// isotropically from the full width.
    std::size_t latent_dim = 128;
};

/// Random bundle with a planted gold candidate. Gold vectors are
/// normalize(s * mention + (1 - s) * noise), distractors are pure noise, and
/// the gold's cross-modal scores have their mean shifted up by s.
Bundle generate_synthetic(const SynthConfig& config);

} // namespace drin
