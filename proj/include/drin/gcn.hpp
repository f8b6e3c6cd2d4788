#pragma once

// Dynamic graph convolution. One layer maps (H, A) to (H', A'):
//
//   H'_i  = act(sum_j A_ij W_h H_j) + H_i
//   A'_ij = M_ij * (act((W_a H'_i)^T (W_a H'_j)) + A_ij)
//
// Rows are vertices, so the vertex update is act(A H W_h^T) + H and the edge
// update uses the Gram matrix of H' W_a^T. The edge update reads the
// already-updated vertices.

#include <cstddef>
#include <random>
#include <vector>

#include "drin/graph.hpp"

namespace drin {

struct GcnLayerVars {
    Var vertex_weight;
    Var edge_weight;
};

template <typename T>
struct GcnLayerParams {
    Parameter<T> vertex_weight; // d x d
    Parameter<T> edge_weight;   // d_a x d

    static GcnLayerParams init(std::size_t index, std::size_t d, std::size_t edge_dim, std::mt19937_64& rng) {
        const std::string prefix = "gcn." + std::to_string(index);
        GcnLayerParams p;
        p.vertex_weight = {prefix + ".vertex_weight", fan_in_uniform<T>(d, d, rng)};
        p.edge_weight = {prefix + ".edge_weight", fan_in_uniform<T>(edge_dim, d, rng)};
        return p;
    }

    GcnLayerVars bind(Tape<T>& tape) { return {vertex_weight.bind(tape), edge_weight.bind(tape)}; }
    GcnLayerVars bind_frozen(Tape<T>& tape) const {
        return {vertex_weight.bind_frozen(tape), edge_weight.bind_frozen(tape)};
    }
};

/// L independent layers sharing one activation.
template <typename T>
struct GcnStack {
    std::vector<GcnLayerParams<T>> layers;
    Activation activation = Activation::tanh;

    static GcnStack init(std::size_t num_layers, std::size_t d, std::size_t edge_dim, Activation act,
                         std::mt19937_64& rng) {
        GcnStack s;
        s.activation = act;
        for (std::size_t l = 0; l < num_layers; ++l) {
            s.layers.push_back(GcnLayerParams<T>::init(l, d, edge_dim, rng));
        }
        return s;
    }

    std::vector<GcnLayerVars> bind(Tape<T>& tape) {
        std::vector<GcnLayerVars> out;
        for (auto& l : layers) {
            out.push_back(l.bind(tape));
        }
        return out;
    }
    std::vector<GcnLayerVars> bind_frozen(Tape<T>& tape) const {
        std::vector<GcnLayerVars> out;
        for (const auto& l : layers) {
            out.push_back(l.bind_frozen(tape));
        }
        return out;
    }
};

struct LayerOutput {
    Var H;
    Var A;
};

template <typename T>
LayerOutput layer_forward(Tape<T>& tape, Var H, Var A, const Tensor<T>& M, const GcnLayerVars& params,
                          Activation activation);

/// Applies every layer in order. When `trace` is given it receives each
/// layer's output.
template <typename T>
LayerOutput stack_forward(Tape<T>& tape, const MentionGraph<T>& graph, std::span<const GcnLayerVars> layers,
                          Activation activation, std::vector<LayerOutput>* trace = nullptr);

} // namespace drin
