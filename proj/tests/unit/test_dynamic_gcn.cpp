#include <gtest/gtest.h>

#include <random>

#include "drin/error.hpp"
#include "drin/gcn.hpp"
#include "drin/model.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace {

using namespace drin;
using testutil::random_tensor;
using testutil::to_matrix;
using testutil::to_tensor;

oracle::Matrix symmetric_masked(const oracle::Matrix& raw, const oracle::Matrix& mask) {
    oracle::Matrix a = raw;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < a.size(); ++j) {
            a[i][j] = mask[i][j] * (i < j ? raw[i][j] : raw[j][i]);
        }
    }
    return a;
}

class LayerVsOracle : public ::testing::TestWithParam<Activation> {};

TEST_P(LayerVsOracle, MatchesExplicitLoops) {
    const Activation act = GetParam();
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        std::mt19937_64 rng(seed);
        const std::size_t r = 2 + seed % 3, d = 5, da = 3;
        const std::size_t n = VertexRoles{r}.n();
        const auto mask = to_matrix(relation_mask<double>(r));
        const auto H = oracle::random_matrix(n, d, rng);
        const auto A = symmetric_masked(oracle::random_matrix(n, n, rng), mask);
        const auto Wh = oracle::random_matrix(d, d, rng);
        const auto Wa = oracle::random_matrix(da, d, rng);
        const auto [Hn, An] = oracle::gcn_layer(H, A, mask, Wh, Wa, act == Activation::tanh);

        Tape<double> tape;
        const GcnLayerVars vars{tape.constant(to_tensor<double>(Wh)), tape.constant(to_tensor<double>(Wa))};
        const LayerOutput out = layer_forward(tape, tape.constant(to_tensor<double>(H)),
                                              tape.constant(to_tensor<double>(A)), to_tensor<double>(mask), vars, act);
        const auto h = to_matrix(tape.value(out.H));
        const auto a = to_matrix(tape.value(out.A));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t f = 0; f < d; ++f) {
                EXPECT_NEAR(h[i][f], Hn[i][f], 1e-12);
            }
            for (std::size_t j = 0; j < n; ++j) {
                EXPECT_NEAR(a[i][j], An[i][j], 1e-12);
            }
        }
    }
}

INSTANTIATE_TEST_SUITE_P(Activations, LayerVsOracle, ::testing::Values(Activation::tanh, Activation::leaky_relu));

TEST(DynamicGcn, EmptyAdjacencyLeavesVerticesUnchanged) {
    std::mt19937_64 rng(1);
    const std::size_t r = 3, d = 4;
    const std::size_t n = VertexRoles{r}.n();
    Tape<double> tape;
    const Tensor<double> H = random_tensor<double>({n, d}, rng);
    const GcnLayerVars vars{tape.constant(random_tensor<double>({d, d}, rng)),
                            tape.constant(random_tensor<double>({d, d}, rng))};
    const LayerOutput out = layer_forward(tape, tape.constant(H), tape.constant(Tensor<double>({n, n})),
                                          relation_mask<double>(r), vars, Activation::tanh);
    EXPECT_EQ(tape.value(out.H), H);
}

TEST(DynamicGcn, UpdatedEdgesStayMaskedAndSymmetric) {
    std::mt19937_64 rng(2);
    const std::size_t r = 4, d = 6;
    const std::size_t n = VertexRoles{r}.n();
    const Tensor<float> M = relation_mask<float>(r);
    const auto A0 = symmetric_masked(oracle::random_matrix(n, n, rng), to_matrix(M));
    Tape<float> tape;
    GcnStack<float> stack = GcnStack<float>::init(3, d, 4, Activation::leaky_relu, rng);
    MentionGraph<float> g{tape.constant(random_tensor<float>({n, d}, rng)), tape.constant(to_tensor<float>(A0)), M,
                          VertexRoles{r}};
    const auto vars = stack.bind(tape);
    std::vector<LayerOutput> trace;
    const LayerOutput out = stack_forward(tape, g, vars, stack.activation, &trace);
    ASSERT_EQ(trace.size(), 3u);
    EXPECT_EQ(trace.back().H.id, out.H.id);
    for (const LayerOutput& layer : trace) {
        const Tensor<float>& a = tape.value(layer.A);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                EXPECT_EQ(a(i, j), a(j, i));
                if (M(i, j) == 0.0f) {
                    EXPECT_EQ(a(i, j), 0.0f);
                }
            }
        }
    }
}

TEST(DynamicGcn, EmptyStackIsRejected) {
    Tape<double> tape;
    MentionGraph<double> g{tape.constant(Tensor<double>({6, 2})), tape.constant(Tensor<double>({6, 6})),
                           relation_mask<double>(2), VertexRoles{2}};
    EXPECT_THROW(stack_forward<double>(tape, g, {}, Activation::tanh), ContractError);
}

TEST(DynamicGcn, InconsistentShapesAreRejected) {
    Tape<double> tape;
    const GcnLayerVars vars{tape.constant(Tensor<double>::identity(2)), tape.constant(Tensor<double>::identity(2))};
    EXPECT_THROW(layer_forward(tape, tape.constant(Tensor<double>({6, 2})), tape.constant(Tensor<double>({5, 5})),
                               relation_mask<double>(2), vars, Activation::tanh),
                 ShapeError);
}

TEST(DynamicGcn, MentionTextGradientMatchesFiniteDifferences) {
    SynthConfig sc;
    sc.num_samples = 1;
    sc.r = 2;
    sc.k = 2;
    sc.seed = 5;
    sc.text_dim = 12;
    sc.image_dim = 10;
    sc.object_dim = 7;
    sc.latent_dim = 0;
    const MentionRecord rec = generate_synthetic(sc).records.front();
    ModelShape shape{12, 10, 8, 8, 2, Activation::tanh};
    std::mt19937_64 rng(9);
    ModelParams<double> model = ModelParams<double>::init(shape, rng);

    auto objective = [](Tape<double>& tape, const ForwardResult<double>& f) {
        return tape.sum(tape.row(f.output.H, VertexRoles::mention_text()));
    };
    {
        Tape<double> tape;
        const ForwardResult<double> f = forward(tape, rec, model);
        tape.backward(objective(tape, f));
    }
    const double h = 1e-5;
    double worst = 0.0;
    for (Parameter<double>* p : model.parameters()) {
        auto w = p->value.data();
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double saved = w[i];
            auto eval = [&]() {
                Tape<double> tape;
                const ForwardResult<double> f = forward_frozen(tape, rec, model);
                return tape.value(objective(tape, f)).item();
            };
            w[i] = saved + h;
            const double up = eval();
            w[i] = saved - h;
            const double down = eval();
            w[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            worst = std::max(worst, oracle::grad_error(p->grad.data()[i], numeric));
        }
    }
    EXPECT_LT(worst, 1e-4);
}

} // namespace
