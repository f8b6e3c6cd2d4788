#include "drin/gcn.hpp"

#include "drin/error.hpp"

namespace drin {

template <typename T>
LayerOutput layer_forward(Tape<T>& tape, Var H, Var A, const Tensor<T>& M, const GcnLayerVars& params,
                          Activation activation) {
    const Tensor<T>& h = tape.value(H);
    const Tensor<T>& a = tape.value(A);
    if (h.rank() != 2 || a.rank() != 2 || a.rows() != h.rows() || a.cols() != h.rows() || M.shape() != a.shape()) {
        throw ShapeError("layer_forward: H " + shape_str(h.shape()) + ", A " + shape_str(a.shape()) + ", M " +
                         shape_str(M.shape()) + " are inconsistent");
    }

    const Var messages = tape.matmul_nt(H, params.vertex_weight);
    const Var h_next = tape.add(tape.activation(tape.propagate(A, messages), activation), H);

    const Var projected = tape.matmul_nt(h_next, params.edge_weight);
    const Var gram = tape.matmul_nt(projected, projected);
    const Var a_next = tape.mask(tape.add(tape.activation(gram, activation), A), M);
    return {h_next, a_next};
}

template <typename T>
LayerOutput stack_forward(Tape<T>& tape, const MentionGraph<T>& graph, std::span<const GcnLayerVars> layers,
                          Activation activation, std::vector<LayerOutput>* trace) {
    if (layers.empty()) {
        throw ContractError("stack_forward: at least one layer is required");
    }
    LayerOutput state{graph.H, graph.A};
    for (const GcnLayerVars& layer : layers) {
        state = layer_forward(tape, state.H, state.A, graph.M, layer, activation);
        if (trace != nullptr) {
            trace->push_back(state);
        }
    }
    return state;
}

template LayerOutput layer_forward<float>(Tape<float>&, Var, Var, const Tensor<float>&, const GcnLayerVars&,
                                          Activation);
template LayerOutput layer_forward<double>(Tape<double>&, Var, Var, const Tensor<double>&, const GcnLayerVars&,
                                           Activation);
template LayerOutput stack_forward<float>(Tape<float>&, const MentionGraph<float>&, std::span<const GcnLayerVars>,
                                          Activation, std::vector<LayerOutput>*);
template LayerOutput stack_forward<double>(Tape<double>&, const MentionGraph<double>&,
                                           std::span<const GcnLayerVars>, Activation, std::vector<LayerOutput>*);

} // namespace drin
