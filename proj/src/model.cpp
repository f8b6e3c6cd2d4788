#include "drin/model.hpp"

namespace drin {

template <typename T>
ModelParams<T> ModelParams<T>::init(const ModelShape& shape, std::mt19937_64& rng) {
    if (shape.layers < 1 || shape.hidden_dim == 0 || shape.edge_dim == 0) {
        throw ConfigError("model needs at least one layer and positive dimensions");
    }
    ModelParams m;
    m.projection = ProjectionParams<T>::init(shape.hidden_dim, shape.text_dim, shape.image_dim, rng);
    m.gcn = GcnStack<T>::init(shape.layers, shape.hidden_dim, shape.edge_dim, shape.activation, rng);
    return m;
}

template <typename T>
ModelShape ModelParams<T>::shape() const {
    ModelShape s;
    s.text_dim = projection.mention_text.value.cols();
    s.image_dim = projection.mention_image.value.cols();
    s.hidden_dim = projection.mention_text.value.rows();
    s.edge_dim = gcn.layers.empty() ? s.hidden_dim : gcn.layers.front().edge_weight.value.rows();
    s.layers = gcn.layers.size();
    s.activation = gcn.activation;
    return s;
}

template <typename T>
std::vector<Parameter<T>*> ModelParams<T>::parameters() {
    std::vector<Parameter<T>*> out{&projection.mention_text, &projection.entity_text, &projection.mention_image,
                                   &projection.entity_image};
    for (auto& l : gcn.layers) {
        out.push_back(&l.vertex_weight);
        out.push_back(&l.edge_weight);
    }
    return out;
}

template <typename T>
std::vector<const Parameter<T>*> ModelParams<T>::parameters() const {
    std::vector<const Parameter<T>*> out{&projection.mention_text, &projection.entity_text,
                                         &projection.mention_image, &projection.entity_image};
    for (const auto& l : gcn.layers) {
        out.push_back(&l.vertex_weight);
        out.push_back(&l.edge_weight);
    }
    return out;
}

template <typename T>
void ModelParams<T>::zero_grad() {
    for (Parameter<T>* p : parameters()) {
        p->zero_grad();
    }
}

namespace {

template <typename T>
ForwardResult<T> run(Tape<T>& tape, const MentionRecord& record, const ProjectionVars& proj,
                     const std::vector<GcnLayerVars>& layers, Activation act, const EdgeInit* edges) {
    ForwardResult<T> f;
    f.graph = assemble(tape, record, proj, edges);
    f.output = stack_forward(tape, f.graph, std::span<const GcnLayerVars>(layers), act);
    f.scores = score_candidates(tape, f.output.H, f.graph.roles);
    return f;
}

} // namespace

template <typename T>
ForwardResult<T> forward(Tape<T>& tape, const MentionRecord& record, ModelParams<T>& model, const EdgeInit* edges) {
    const ProjectionVars proj = model.projection.bind(tape);
    const std::vector<GcnLayerVars> layers = model.gcn.bind(tape);
    return run(tape, record, proj, layers, model.gcn.activation, edges);
}

template <typename T>
ForwardResult<T> forward_frozen(Tape<T>& tape, const MentionRecord& record, const ModelParams<T>& model,
                                const EdgeInit* edges) {
    const ProjectionVars proj = model.projection.bind_frozen(tape);
    const std::vector<GcnLayerVars> layers = model.gcn.bind_frozen(tape);
    return run(tape, record, proj, layers, model.gcn.activation, edges);
}

template <typename T>
std::vector<double> score_record(const MentionRecord& record, const ModelParams<T>& model, const EdgeInit* edges) {
    Tape<T> tape;
    const ForwardResult<T> f = forward_frozen(tape, record, model, edges);
    const Tensor<T>& s = tape.value(f.scores);
    return std::vector<double>(s.data().begin(), s.data().end());
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template ForwardResult<float> forward<float>(Tape<float>&, const MentionRecord&, ModelParams<float>&,
                                             const EdgeInit*);
template ForwardResult<double> forward<double>(Tape<double>&, const MentionRecord&, ModelParams<double>&,
                                               const EdgeInit*);
template ForwardResult<float> forward_frozen<float>(Tape<float>&, const MentionRecord&, const ModelParams<float>&,
                                                    const EdgeInit*);
template ForwardResult<double> forward_frozen<double>(Tape<double>&, const MentionRecord&,
                                                      const ModelParams<double>&, const EdgeInit*);
template std::vector<double> score_record<float>(const MentionRecord&, const ModelParams<float>&, const EdgeInit*);
template std::vector<double> score_record<double>(const MentionRecord&, const ModelParams<double>&,
                                                  const EdgeInit*);

} // namespace drin
