#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "drin/error.hpp"
#include "drin/graph.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace {

using namespace drin;

SynthConfig small_config(std::size_t r, std::size_t k, std::uint64_t seed = 11) {
    SynthConfig c;
    c.num_samples = 1;
    c.r = r;
    c.k = k;
    c.seed = seed;
    c.text_dim = 8;
    c.image_dim = 6;
    c.object_dim = 5;
    c.latent_dim = 0;
    return c;
}

MentionRecord one_record(std::size_t r, std::size_t k, std::uint64_t seed = 11) {
    return generate_synthetic(small_config(r, k, seed)).records.front();
}

TEST(GraphBuilder, TextEdgeIsCosineOfClsVectors) {
    const MentionRecord rec = one_record(4, 1);
    for (const CandidateRecord& c : rec.candidates) {
        EXPECT_NEAR(edge_tt(rec.cls_vec, c.cls_vec), oracle::cosine(oracle::widen(rec.cls_vec), oracle::widen(c.cls_vec)),
                    1e-12);
    }
    const std::vector<float> a{1, 2};
    const std::vector<float> b{3, 4};
    EXPECT_NEAR(edge_tt(a, b), 11.0 / (5.0 * std::sqrt(5.0)), 1e-12);
    EXPECT_NEAR(edge_tt(a, a), 1.0, 1e-15);
    const std::vector<float> z{0, 0};
    EXPECT_THROW(edge_tt(a, z), DegenerateInputError);
}

TEST(GraphBuilder, RegionEdgeMatchesDoubleLoop) {
    for (std::size_t k : {0u, 1u, 2u, 5u}) {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const MentionRecord rec = one_record(3, k, seed);
            for (const CandidateRecord& c : rec.candidates) {
                EXPECT_NEAR(edge_vv(rec.objects, c.objects), oracle::edge_vv(rec.objects, c.objects), 1e-12)
                    << "k=" << k << " seed=" << seed;
            }
        }
    }
}

TEST(GraphBuilder, RegionEdgeOfIdenticalRegionsIsWeightedSelfSimilarity) {
    const std::vector<ObjectRegion> one{{{1, 0, 0}, 0.5f}};
    EXPECT_NEAR(edge_vv(one, one), 1.0, 1e-15);
    const std::vector<ObjectRegion> two{{{1, 0, 0}, 1.0f}, {{0, 1, 0}, 1.0f}};
    EXPECT_NEAR(edge_vv(two, two), 0.5, 1e-15);
    EXPECT_EQ(edge_vv({}, two), 0.0);
}

TEST(GraphBuilder, MissingImagesZeroTheirEdges) {
    MentionRecord rec = one_record(3, 2);
    rec.candidates[1].img_vec.assign(rec.candidates[1].img_vec.size(), 0.0f);
    EdgeInit e = initial_edges(rec);
    EXPECT_EQ(e.text_image[1], 0.0);
    EXPECT_EQ(e.image_image[1], 0.0);
    EXPECT_NE(e.image_text[1], 0.0);
    EXPECT_NE(e.text_image[0], 0.0);

    rec.img_vec.assign(rec.img_vec.size(), 0.0f);
    e = initial_edges(rec);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(e.image_text[i], 0.0);
        EXPECT_EQ(e.image_image[i], 0.0);
        EXPECT_NE(e.text_text[i], 0.0);
    }
}

TEST(GraphBuilder, MaskCoversExactlyTheCrossSideRelations) {
    const std::size_t r = 4;
    const Tensor<double> m = relation_mask<double>(r);
    const VertexRoles roles{r};
    ASSERT_EQ(m.rows(), roles.n());
    double total = 0.0;
    for (std::size_t i = 0; i < roles.n(); ++i) {
        for (std::size_t j = 0; j < roles.n(); ++j) {
            const bool mention_i = i < 2;
            const bool mention_j = j < 2;
            EXPECT_EQ(m(i, j), mention_i != mention_j ? 1.0 : 0.0) << i << "," << j;
            total += m(i, j);
        }
    }
    EXPECT_EQ(total, 8.0 * r);
}

TEST(GraphBuilder, InitialAdjacencyIsSymmetricAndPlacesWeights) {
    const MentionRecord rec = one_record(3, 2);
    const EdgeInit e = initial_edges(rec);
    const Tensor<double> a = initial_adjacency<double>(e);
    const Tensor<double> m = relation_mask<double>(3);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        EXPECT_EQ(a(i, i), 0.0);
        for (std::size_t j = 0; j < a.cols(); ++j) {
            EXPECT_EQ(a(i, j), a(j, i));
            if (m(i, j) == 0.0) {
                EXPECT_EQ(a(i, j), 0.0);
            }
        }
    }
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(a(0, VertexRoles::entity_text(i)), e.text_text[i]);
        EXPECT_EQ(a(0, VertexRoles::entity_image(i)), e.text_image[i]);
        EXPECT_EQ(a(1, VertexRoles::entity_text(i)), e.image_text[i]);
        EXPECT_EQ(a(1, VertexRoles::entity_image(i)), e.image_image[i]);
    }
}

TEST(GraphBuilder, VertexLayoutFollowsRoles) {
    const MentionRecord rec = one_record(3, 1);
    std::mt19937_64 rng(1);
    Tape<double> tape;
    ProjectionVars p{tape.constant(Tensor<double>::identity(8)), tape.constant(Tensor<double>::identity(8)),
                     tape.constant(testutil::random_tensor<double>({8, 6}, rng)),
                     tape.constant(testutil::random_tensor<double>({8, 6}, rng))};
    const MentionGraph<double> g = assemble(tape, rec, p);
    const Tensor<double>& H = tape.value(g.H);
    const Tensor<double>& Wv = tape.value(p.mention_image);
    ASSERT_EQ(H.rows(), 8u);
    ASSERT_EQ(H.cols(), 8u);
    for (std::size_t f = 0; f < 8; ++f) {
        EXPECT_EQ(H(0, f), static_cast<double>(rec.span_pooled_vec[f]));
        for (std::size_t i = 0; i < 3; ++i) {
            EXPECT_EQ(H(VertexRoles::entity_text(i), f), static_cast<double>(rec.candidates[i].cls_vec[f]));
        }
        double img = 0.0;
        for (std::size_t c = 0; c < 6; ++c) {
            img += Wv(f, c) * rec.img_vec[c];
        }
        EXPECT_NEAR(H(1, f), img, 1e-12);
    }
    EXPECT_EQ(g.roles.n(), 8u);
    EXPECT_EQ(tape.value(g.A), initial_adjacency<double>(initial_edges(rec)));
    EXPECT_EQ(g.M, relation_mask<double>(3));
}

TEST(GraphBuilder, IdentityProjectionAtEncoderWidthKeepsMentionText) {
    SynthConfig c;
    c.num_samples = 1;
    c.r = 2;
    c.k = 1;
    const MentionRecord rec = generate_synthetic(c).records.front();
    std::mt19937_64 rng(2);
    Tape<double> tape;
    ProjectionVars p{tape.constant(Tensor<double>::identity(768)), tape.constant(Tensor<double>::identity(768)),
                     tape.constant(testutil::random_tensor<double>({768, 2048}, rng)),
                     tape.constant(testutil::random_tensor<double>({768, 2048}, rng))};
    const Var H = project_vertices(tape, rec, p);
    const Tensor<double>& h = tape.value(H);
    for (std::size_t f = 0; f < 768; ++f) {
        ASSERT_EQ(h(0, f), static_cast<double>(rec.span_pooled_vec[f])) << f;
    }
}

TEST(GraphBuilder, CachedEdgesMustMatchCandidateCount) {
    const MentionRecord rec = one_record(3, 1);
    const EdgeInit wrong = initial_edges(one_record(2, 1));
    std::mt19937_64 rng(3);
    Tape<float> tape;
    auto params = ProjectionParams<float>::init(4, 8, 6, rng);
    const ProjectionVars p = params.bind_frozen(tape);
    EXPECT_THROW(assemble(tape, rec, p, &wrong), ShapeError);
    const EdgeInit right = initial_edges(rec);
    EXPECT_NO_THROW(assemble(tape, rec, p, &right));
}

} // namespace
