#include "drin/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "drin/bundle.hpp"
#include "drin/error.hpp"
#include "drin/model.hpp"

namespace drin {

double relative_error(double analytic, double numeric) {
    const double diff = std::abs(analytic - numeric);
    if (std::abs(analytic) <= 1e-8) {
        return diff;
    }
    return diff / std::max(std::abs(analytic), std::abs(numeric));
}

namespace {

struct Objective {
    const MentionRecord& record;
    const EdgeInit& edges;
    Tensor<double> weights;
    double margin = 0.0;

    Var objective(Tape<double>& tape, const ForwardResult<double>& f) const {
        const ScoredMention sm{f.scores, record.gold_index};
        const Var ranking = margin_loss(tape, std::span<const ScoredMention>(&sm, 1), margin);
        return tape.add(ranking, tape.sum(tape.mask(f.scores, weights)));
    }

    double value(const ModelParams<double>& model) const {
        Tape<double> tape;
        return tape.value(objective(tape, forward_frozen(tape, record, model, &edges))).item();
    }
};

} // namespace

GradCheckReport run_gradcheck(const GradCheckConfig& config) {
    if (config.r < 2) {
        throw ConfigError("gradcheck needs r >= 2");
    }
    if (!(config.step > 0.0)) {
        throw ConfigError("gradcheck step must be positive");
    }
    const auto start = std::chrono::steady_clock::now();

    SynthConfig sc;
    sc.num_samples = 1;
    sc.r = config.r;
    sc.k = config.k;
    sc.signal_strength = 0.5;
    sc.seed = config.seed;
    sc.text_dim = config.text_dim;
    sc.image_dim = config.image_dim;
    sc.object_dim = config.image_dim;
    const Bundle bundle = generate_synthetic(sc);
    const MentionRecord& record = bundle.records.front();
    const EdgeInit edges = initial_edges(record);

    std::mt19937_64 rng(config.seed);
    ModelShape shape;
    shape.text_dim = config.text_dim;
    shape.image_dim = config.image_dim;
    shape.hidden_dim = config.hidden_dim;
    shape.edge_dim = config.hidden_dim;
    shape.layers = config.layers;
    shape.activation = config.activation;
    ModelParams<double> model = ModelParams<double>::init(shape, rng);

    Objective obj{record, edges, Tensor<double>(Shape{config.r}), 3.0};
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& w : obj.weights.data()) {
        w = normal(rng);
    }

    model.zero_grad();
    {
        Tape<double> tape;
        tape.backward(obj.objective(tape, forward(tape, record, model, &edges)));
    }

    GradCheckReport report;
    for (Parameter<double>* p : model.parameters()) {
        ParamGradError e;
        e.name = p->name;
        e.count = p->value.size();
        auto w = p->value.data();
        auto g = p->grad.data();
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double saved = w[i];
            w[i] = saved + config.step;
            const double up = obj.value(model);
            w[i] = saved - config.step;
            const double down = obj.value(model);
            w[i] = saved;
            const double numeric = (up - down) / (2.0 * config.step);
            e.max_rel_error = std::max(e.max_rel_error, relative_error(g[i], numeric));
            e.max_abs_grad = std::max(e.max_abs_grad, std::abs(g[i]));
        }
        report.max_rel_error = std::max(report.max_rel_error, e.max_rel_error);
        report.params.push_back(std::move(e));
    }
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.passed = report.max_rel_error < config.tolerance;
    return report;
}

} // namespace drin
