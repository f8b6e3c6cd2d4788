#pragma once

// Relation graph for one mention and its r candidates. Vertex layout:
//   0        mention text
//   1        mention image
//   2 + 2i   candidate i text
//   3 + 2i   candidate i image
// Edges exist only between a mention vertex and a candidate vertex (four
// alignment relations per candidate).

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "drin/bundle.hpp"
#include "drin/parameter.hpp"
#include "drin/tape.hpp"

namespace drin {

struct VertexRoles {
    std::size_t r = 0;

    static constexpr std::size_t mention_text() { return 0; }
    static constexpr std::size_t mention_image() { return 1; }
    static constexpr std::size_t entity_text(std::size_t i) { return 2 + 2 * i; }
    static constexpr std::size_t entity_image(std::size_t i) { return 3 + 2 * i; }
    std::size_t n() const { return 2 + 2 * r; }
};

struct ProjectionVars {
    Var mention_text;
    Var entity_text;
    Var mention_image;
    Var entity_image;
};

/// Linear maps from encoder width into the d-dimensional vertex space.
template <typename T>
struct ProjectionParams {
    Parameter<T> mention_text;  // d x text_dim
    Parameter<T> entity_text;   // d x text_dim
    Parameter<T> mention_image; // d x image_dim
    Parameter<T> entity_image;  // d x image_dim

    static ProjectionParams init(std::size_t d, std::size_t text_dim, std::size_t image_dim, std::mt19937_64& rng) {
        ProjectionParams p;
        p.mention_text = {"projection.mention_text", fan_in_uniform<T>(d, text_dim, rng)};
        p.entity_text = {"projection.entity_text", fan_in_uniform<T>(d, text_dim, rng)};
        p.mention_image = {"projection.mention_image", fan_in_uniform<T>(d, image_dim, rng)};
        p.entity_image = {"projection.entity_image", fan_in_uniform<T>(d, image_dim, rng)};
        return p;
    }

    ProjectionVars bind(Tape<T>& tape) {
        return {mention_text.bind(tape), entity_text.bind(tape), mention_image.bind(tape), entity_image.bind(tape)};
    }
    ProjectionVars bind_frozen(Tape<T>& tape) const {
        return {mention_text.bind_frozen(tape), entity_text.bind_frozen(tape), mention_image.bind_frozen(tape),
                entity_image.bind_frozen(tape)};
    }
};

/// Initial weights of the four relations, one entry per candidate. These
/// depend only on the record, so callers may compute them once and reuse.
struct EdgeInit {
    std::vector<double> text_text;   // mention text  - entity text
    std::vector<double> text_image;  // mention text  - entity image
    std::vector<double> image_text;  // mention image - entity text
    std::vector<double> image_image; // mention image - entity image
};

template <typename T>
struct MentionGraph {
    Var H;       // n x d vertex features
    Var A;       // n x n edge weights
    Tensor<T> M; // n x n relation mask
    VertexRoles roles;
};

/// Cosine of the two sentence-level CLS vectors. Throws DegenerateInputError
/// on a zero vector.
double edge_tt(std::span<const float> mention_cls, std::span<const float> entity_cls);

/// Confidence-weighted mean cosine over all region pairs:
///   sum_ij s_i s_j cos(v_i, v_j) / (sum_i s_i * sum_j s_j).
/// Zero when either side has no regions.
double edge_vv(std::span<const ObjectRegion> mention_objects, std::span<const ObjectRegion> entity_objects);

/// Missing images (all-zero img_vec) zero every edge incident to that image
/// vertex.
EdgeInit initial_edges(const MentionRecord& record);

/// Binary mask of the four cross-side relations per candidate.
template <typename T>
Tensor<T> relation_mask(std::size_t r);

/// Symmetric A0 from per-candidate relation weights.
template <typename T>
Tensor<T> initial_adjacency(const EdgeInit& edges);

/// Projects raw encoder vectors into H0 in the vertex layout above.
template <typename T>
Var project_vertices(Tape<T>& tape, const MentionRecord& record, const ProjectionVars& params);

/// Builds H0, A0 and M. `cached` skips recomputing the relation weights.
template <typename T>
MentionGraph<T> assemble(Tape<T>& tape, const MentionRecord& record, const ProjectionVars& params,
                         const EdgeInit* cached = nullptr);

} // namespace drin
