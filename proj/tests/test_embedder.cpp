#include <gtest/gtest.h>

#include <cmath>

#include "mpc/embedder.hpp"
#include "mpc/error.hpp"
#include "mpc/model.hpp"
#include "test_util.hpp"

using namespace mpc;

namespace {

Matrix random_tokens(Rng& rng, std::size_t t, std::size_t f) {
    Matrix m(t, f);
    for (double& v : m.data) v = rng.normal();
    return m;
}

EmbedderParams random_params(std::size_t f, std::size_t h, std::size_t d, std::uint64_t seed) {
    EmbedderParams p = init_params({f, h, d}, seed);
    Rng rng(seed + 100);
    for (auto* v : {&p.proj_b, &p.attn_w2, &p.fc_b})
        for (double& x : *v) x = 0.5 * rng.normal();
    return p;
}

}  // namespace

TEST(AttentionPool, SingleTokenReturnsThatToken) {
    Rng rng(1);
    const Matrix tokens = random_tokens(rng, 1, 5);
    const Vec out = attention_pool(tokens, random_params(5, 3, 4, 2));
    for (std::size_t f = 0; f < 5; ++f) EXPECT_DOUBLE_EQ(out[f], tokens(0, f));
}

TEST(AttentionPool, ZeroScorerGivesColumnMean) {
    Rng rng(2);
    const Matrix tokens = random_tokens(rng, 4, 3);
    EmbedderParams p = random_params(3, 2, 2, 3);
    std::fill(p.attn_w2.begin(), p.attn_w2.end(), 0.0);
    const Vec out = attention_pool(tokens, p);
    for (std::size_t f = 0; f < 3; ++f) {
        double mean = 0.0;
        for (std::size_t t = 0; t < 4; ++t) mean += tokens(t, f) / 4.0;
        EXPECT_NEAR(out[f], mean, 1e-15);
    }
}

TEST(AttentionPool, IdenticalTokensReturnTheRow) {
    Matrix tokens(3, 2);
    for (std::size_t t = 0; t < 3; ++t) {
        tokens(t, 0) = 0.7;
        tokens(t, 1) = -1.25;
    }
    const Vec out = attention_pool(tokens, random_params(2, 4, 3, 4));
    EXPECT_NEAR(out[0], 0.7, 1e-15);
    EXPECT_NEAR(out[1], -1.25, 1e-15);
}

TEST(AttentionPool, WeightsAreADistribution) {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const Vec a = attention_weights(random_tokens(rng, 6, 4), random_params(4, 3, 2, 10 + trial));
        double s = 0.0;
        for (double w : a) {
            EXPECT_GE(w, 0.0);
            s += w;
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(AttentionPool, ShapeMismatchThrows) {
    Rng rng(4);
    EXPECT_THROW(attention_pool(random_tokens(rng, 2, 5), random_params(4, 3, 2, 1)), Error);
}

TEST(LayerNorm, ShiftInvariantAndStandardized) {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        Vec x(8);
        for (double& v : x) v = 3.0 * rng.normal();
        const double c = 10.0 * rng.normal();
        Vec shifted = x;
        for (double& v : shifted) v += c;
        const Vec a = layer_norm(x), b = layer_norm(shifted);
        double mean = 0.0, var = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            EXPECT_NEAR(a[i], b[i], 1e-12);
            mean += a[i] / 8.0;
        }
        for (double v : a) var += (v - mean) * (v - mean) / 8.0;
        EXPECT_NEAR(mean, 0.0, 1e-12);
        EXPECT_NEAR(var, 1.0, 1e-5);
    }
}

TEST(EmbedHead, ZeroFcReducesToProjection) {
    Rng rng(6);
    EmbedderParams p = random_params(5, 3, 4, 7);
    std::fill(p.fc_w.data.begin(), p.fc_w.data.end(), 0.0);
    std::fill(p.fc_b.begin(), p.fc_b.end(), 0.0);
    const TokenSet ts{random_tokens(rng, 3, 5), Modality::Image};
    const ProbEmbedding e = embed_head(ts, p);
    // z = proj(mean-pool tokens), computed independently
    Vec z = p.proj_b;
    for (std::size_t d = 0; d < 4; ++d)
        for (std::size_t f = 0; f < 5; ++f) {
            double pooled = 0.0;
            for (std::size_t t = 0; t < 3; ++t) pooled += ts.tokens(t, f) / 3.0;
            z[d] += pooled * p.proj_w(f, d);
        }
    const Vec ln = layer_norm(z);
    for (std::size_t d = 0; d < 4; ++d) {
        EXPECT_NEAR(e.log_var[d], z[d], 1e-12);
        EXPECT_NEAR(e.mean[d], ln[d], 1e-9);
    }
}

TEST(EmbedHead, MeanIsStandardizedForAnyInput) {
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const TokenSet ts{random_tokens(rng, 1 + trial % 4, 6), Modality::Text};
        const ProbEmbedding e = embed_head(ts, random_params(6, 4, 8, 20 + trial));
        double mean = 0.0, var = 0.0;
        for (double v : e.mean) mean += v / 8.0;
        for (double v : e.mean) var += (v - mean) * (v - mean) / 8.0;
        EXPECT_NEAR(mean, 0.0, 1e-6);
        EXPECT_NEAR(var, 1.0, 1e-4);  // eps=1e-5 inside the normalizer
        EXPECT_EQ(e.dim(), 8u);
    }
}

TEST(EmbedHead, ReproducibleBitExactly) {
    Rng rng(8);
    const TokenSet ts{random_tokens(rng, 2, 5), Modality::Image};
    const EmbedderParams p = init_params({5, 3, 4}, 99);
    EXPECT_EQ(embed_head(ts, p), embed_head(ts, init_params({5, 3, 4}, 99)));
}

TEST(InitParams, BoundsBiasesAndDeterminism) {
    const EmbedderParams p = init_params({8, 4, 4}, 5);
    EXPECT_EQ(p, init_params({8, 4, 4}, 5));
    EXPECT_EQ(p.proj_w.data.size(), 32u);
    const double bound = 1.0 / std::sqrt(8.0);
    for (double v : p.proj_w.data) EXPECT_LT(std::abs(v), bound);
    for (double v : p.fc_w.data) EXPECT_LT(std::abs(v), bound);
    for (double v : p.attn_w1.data) EXPECT_LT(std::abs(v), bound);
    for (double v : p.proj_b) EXPECT_EQ(v, 0.0);
    for (double v : p.fc_b) EXPECT_EQ(v, 0.0);
    EXPECT_NE(p, init_params({8, 4, 4}, 6));
}

TEST(EmbedHead, GradientMatchesFiniteDifferences) {
    Rng rng(9);
    const TokenSet ts{random_tokens(rng, 3, 5), Modality::Image};
    EmbedderParams p = random_params(5, 3, 4, 11);
    Vec wm(4), wl(4);
    for (double& v : wm) v = rng.normal();
    for (double& v : wl) v = rng.normal();
    auto loss = [&](const EmbedderParams& q) {
        const ProbEmbedding e = embed_head(ts, q);
        double s = 0.0;
        for (std::size_t d = 0; d < 4; ++d) s += wm[d] * e.mean[d] + wl[d] * e.log_var[d];
        return s;
    };
    EmbedderParams grad = zeros_like(p);
    embed_head_backward(ts, p, embed_head_forward(ts, p), wm, wl, grad);

    auto check = [&](std::vector<double>& param, const std::vector<double>& g, const char* name) {
        double max_diff = 0.0, max_num = 0.0;
        for (std::size_t i = 0; i < param.size(); ++i) {
            const double orig = param[i];
            param[i] = orig + 1e-5;
            const double up = loss(p);
            param[i] = orig - 1e-5;
            const double down = loss(p);
            param[i] = orig;
            const double num = (up - down) / 2e-5;
            max_diff = std::max(max_diff, std::abs(num - g[i]));
            max_num = std::max(max_num, std::abs(num));
        }
        EXPECT_LE(max_diff / std::max(max_num, 1e-6), 1e-4) << name;
    };
    check(p.proj_w.data, grad.proj_w.data, "proj_w");
    check(p.proj_b, grad.proj_b, "proj_b");
    check(p.attn_w1.data, grad.attn_w1.data, "attn_w1");
    check(p.attn_w2, grad.attn_w2, "attn_w2");
    check(p.fc_w.data, grad.fc_w.data, "fc_w");
    check(p.fc_b, grad.fc_b, "fc_b");
}

TEST(ModelParams, TensorNamesAndShapes) {
    ModelParams m = init_model({5, 3, 4}, true, 1);
    const auto ts = tensors(m);
    ASSERT_EQ(ts.size(), 16u);
    EXPECT_EQ(ts[0].name, "image.proj_w");
    EXPECT_EQ(ts[0].shape, (std::vector<std::uint32_t>{5, 4}));
    EXPECT_EQ(ts[6].name, "text.proj_w");
    EXPECT_EQ(ts[12].name, "fusion.w1");
    EXPECT_EQ(ts[12].shape, (std::vector<std::uint32_t>{16, 8}));
    EXPECT_EQ(tensors(init_model({5, 3, 4}, false, 1)).size(), 12u);
    EXPECT_NE(m.image_head, m.text_head);
}
