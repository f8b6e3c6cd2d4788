#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "drin/gcn.hpp"
#include "drin/graph.hpp"
#include "drin/scoring.hpp"

namespace drin {

struct ModelShape {
    std::size_t text_dim = 768;
    std::size_t image_dim = 2048;
    std::size_t hidden_dim = 768;
    std::size_t edge_dim = 768;
    std::size_t layers = 2;
    Activation activation = Activation::tanh;

    bool operator==(const ModelShape&) const = default;
};

/// Every trainable tensor of the ranker.
template <typename T>
struct ModelParams {
    ProjectionParams<T> projection;
    GcnStack<T> gcn;

    static ModelParams init(const ModelShape& shape, std::mt19937_64& rng);

    ModelShape shape() const;

    /// Stable order: projections first, then layers front to back.
    std::vector<Parameter<T>*> parameters();
    std::vector<const Parameter<T>*> parameters() const;

    void zero_grad();
};

template <typename T>
struct ForwardResult {
    MentionGraph<T> graph;
    LayerOutput output;
    Var scores;
};

/// Full forward pass for one mention with gradients flowing into `model`.
template <typename T>
ForwardResult<T> forward(Tape<T>& tape, const MentionRecord& record, ModelParams<T>& model,
                         const EdgeInit* edges = nullptr);

/// Same pass without gradient bookkeeping; safe to call concurrently.
template <typename T>
ForwardResult<T> forward_frozen(Tape<T>& tape, const MentionRecord& record, const ModelParams<T>& model,
                                const EdgeInit* edges = nullptr);

/// Candidate scores for one mention.
template <typename T>
std::vector<double> score_record(const MentionRecord& record, const ModelParams<T>& model,
                                 const EdgeInit* edges = nullptr);

extern template struct ModelParams<float>;
extern template struct ModelParams<double>;

} // namespace drin
