#include "drin/graph.hpp"

#include <algorithm>
#include <cmath>

#include "drin/error.hpp"

namespace drin {

namespace {

double squared_norm(std::span<const float> v) {
    double acc = 0.0;
    for (float x : v) {
        acc += static_cast<double>(x) * x;
    }
    return acc;
}

double dot(std::span<const float> a, std::span<const float> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += static_cast<double>(a[i]) * b[i];
    }
    return acc;
}

bool is_zero(std::span<const float> v) {
    return std::all_of(v.begin(), v.end(), [](float x) { return x == 0.0f; });
}

template <typename T>
Tensor<T> rows_of(std::span<const std::vector<float>* const> rows, std::size_t width) {
    Tensor<T> t(Shape{rows.size(), width});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::vector<float>& src = *rows[i];
        if (src.size() != width) {
            throw ShapeError("input vector of length " + std::to_string(src.size()) + " where projection expects " +
                             std::to_string(width));
        }
        std::copy(src.begin(), src.end(), t.row(i).begin());
    }
    return t;
}

} // namespace

double edge_tt(std::span<const float> mention_cls, std::span<const float> entity_cls) {
    if (mention_cls.size() != entity_cls.size()) {
        throw ShapeError("edge_tt: CLS vectors differ in length");
    }
    const double nm = squared_norm(mention_cls);
    const double ne = squared_norm(entity_cls);
    if (nm == 0.0 || ne == 0.0) {
        throw DegenerateInputError("edge_tt: zero CLS vector");
    }
    return dot(mention_cls, entity_cls) / std::sqrt(nm * ne);
}

double edge_vv(std::span<const ObjectRegion> mention_objects, std::span<const ObjectRegion> entity_objects) {
    if (mention_objects.empty() || entity_objects.empty()) {
        return 0.0;
    }
    auto norms = [](std::span<const ObjectRegion> objs) {
        std::vector<double> out;
        for (const ObjectRegion& o : objs) {
            const double n2 = squared_norm(o.feature);
            if (n2 == 0.0) {
                throw DegenerateInputError("edge_vv: object region with zero-norm feature");
            }
            out.push_back(n2);
        }
        return out;
    };
    const std::vector<double> nm = norms(mention_objects);
    const std::vector<double> ne = norms(entity_objects);

    double weighted = 0.0, sm = 0.0, se = 0.0;
    for (const ObjectRegion& o : mention_objects) {
        sm += o.score;
    }
    for (const ObjectRegion& o : entity_objects) {
        se += o.score;
    }
    for (std::size_t i = 0; i < mention_objects.size(); ++i) {
        for (std::size_t j = 0; j < entity_objects.size(); ++j) {
            if (mention_objects[i].feature.size() != entity_objects[j].feature.size()) {
                throw ShapeError("edge_vv: region features differ in length");
            }
            const double c = dot(mention_objects[i].feature, entity_objects[j].feature) / std::sqrt(nm[i] * ne[j]);
            weighted += static_cast<double>(mention_objects[i].score) * entity_objects[j].score * c;
        }
    }
    return weighted / (sm * se);
}

EdgeInit initial_edges(const MentionRecord& record) {
    const std::size_t r = record.candidates.size();
    const bool mention_image = !is_zero(record.img_vec);
    EdgeInit e;
    e.text_text.resize(r);
    e.text_image.resize(r);
    e.image_text.resize(r);
    e.image_image.resize(r);
    for (std::size_t i = 0; i < r; ++i) {
        const CandidateRecord& c = record.candidates[i];
        const bool entity_image = !is_zero(c.img_vec);
        e.text_text[i] = edge_tt(record.cls_vec, c.cls_vec);
        e.text_image[i] = entity_image ? c.clip_text_to_image : 0.0;
        e.image_text[i] = mention_image ? c.clip_image_to_text : 0.0;
        e.image_image[i] = mention_image && entity_image ? edge_vv(record.objects, c.objects) : 0.0;
    }
    return e;
}

template <typename T>
Tensor<T> relation_mask(std::size_t r) {
    const VertexRoles roles{r};
    Tensor<T> m(Shape{roles.n(), roles.n()});
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t mv : {VertexRoles::mention_text(), VertexRoles::mention_image()}) {
            for (std::size_t ev : {VertexRoles::entity_text(i), VertexRoles::entity_image(i)}) {
                m(mv, ev) = T{1};
                m(ev, mv) = T{1};
            }
        }
    }
    return m;
}

template <typename T>
Tensor<T> initial_adjacency(const EdgeInit& edges) {
    const VertexRoles roles{edges.text_text.size()};
    Tensor<T> a(Shape{roles.n(), roles.n()});
    auto set = [&a](std::size_t i, std::size_t j, double w) {
        a(i, j) = static_cast<T>(w);
        a(j, i) = static_cast<T>(w);
    };
    for (std::size_t i = 0; i < roles.r; ++i) {
        set(VertexRoles::mention_text(), VertexRoles::entity_text(i), edges.text_text[i]);
        set(VertexRoles::mention_text(), VertexRoles::entity_image(i), edges.text_image[i]);
        set(VertexRoles::mention_image(), VertexRoles::entity_text(i), edges.image_text[i]);
        set(VertexRoles::mention_image(), VertexRoles::entity_image(i), edges.image_image[i]);
    }
    return a;
}

template <typename T>
Var project_vertices(Tape<T>& tape, const MentionRecord& record, const ProjectionVars& params) {
    const std::size_t r = record.candidates.size();
    if (r == 0) {
        throw ShapeError("project_vertices: record has no candidates");
    }
    const std::size_t text_dim = tape.value(params.mention_text).cols();
    const std::size_t image_dim = tape.value(params.mention_image).cols();

    std::vector<const std::vector<float>*> mt{&record.span_pooled_vec};
    std::vector<const std::vector<float>*> mv{&record.img_vec};
    std::vector<const std::vector<float>*> et, ev;
    for (const CandidateRecord& c : record.candidates) {
        et.push_back(&c.cls_vec);
        ev.push_back(&c.img_vec);
    }

    const Var parts[] = {
        tape.matmul_nt(tape.constant(rows_of<T>(mt, text_dim)), params.mention_text),
        tape.matmul_nt(tape.constant(rows_of<T>(mv, image_dim)), params.mention_image),
        tape.matmul_nt(tape.constant(rows_of<T>(et, text_dim)), params.entity_text),
        tape.matmul_nt(tape.constant(rows_of<T>(ev, image_dim)), params.entity_image),
    };
    // concat order is [mention text, mention image, entity texts..., entity images...]
    std::vector<std::size_t> perm(2 + 2 * r);
    perm[0] = 0;
    perm[1] = 1;
    for (std::size_t i = 0; i < r; ++i) {
        perm[VertexRoles::entity_text(i)] = 2 + i;
        perm[VertexRoles::entity_image(i)] = 2 + r + i;
    }
    return tape.permute_rows(tape.concat_rows(parts), std::move(perm));
}

template <typename T>
MentionGraph<T> assemble(Tape<T>& tape, const MentionRecord& record, const ProjectionVars& params,
                         const EdgeInit* cached) {
    MentionGraph<T> g;
    g.roles.r = record.candidates.size();
    g.H = project_vertices(tape, record, params);
    const EdgeInit edges = cached != nullptr ? *cached : initial_edges(record);
    if (edges.text_text.size() != g.roles.r) {
        throw ShapeError("assemble: cached edge weights do not match the candidate count");
    }
    g.A = tape.constant(initial_adjacency<T>(edges));
    g.M = relation_mask<T>(g.roles.r);
    return g;
}

template Tensor<float> relation_mask<float>(std::size_t);
template Tensor<double> relation_mask<double>(std::size_t);
template Tensor<float> initial_adjacency<float>(const EdgeInit&);
template Tensor<double> initial_adjacency<double>(const EdgeInit&);
template Var project_vertices<float>(Tape<float>&, const MentionRecord&, const ProjectionVars&);
template Var project_vertices<double>(Tape<double>&, const MentionRecord&, const ProjectionVars&);
template MentionGraph<float> assemble<float>(Tape<float>&, const MentionRecord&, const ProjectionVars&,
                                             const EdgeInit*);
template MentionGraph<double> assemble<double>(Tape<double>&, const MentionRecord&, const ProjectionVars&,
                                               const EdgeInit*);

} // namespace drin
