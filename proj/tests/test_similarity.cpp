#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mpc/composer.hpp"
#include "mpc/error.hpp"
#include "mpc/similarity.hpp"
#include "test_util.hpp"

using namespace mpc;

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

// Expected log-density of a target draw under the composite, written out per dimension.
double expected_sim_oracle(const CompositeGaussian& c, const ProbEmbedding& t) {
    double s = c.log_z;
    for (std::size_t d = 0; d < c.dim(); ++d) {
        const double tv = std::exp(t.log_var[d]);
        const double diff = t.mean[d] - c.mean[d];
        s += -0.5 * (kLog2Pi + std::log(c.var[d])) - (tv + diff * diff) / (2.0 * c.var[d]);
    }
    return s;
}

CompositeGaussian std_composite(std::size_t dim, double log_z = 0.0) {
    return {Vec(dim, 0.0), Vec(dim, 1.0), log_z};
}

ProbEmbedding point(Vec mean) {
    ProbEmbedding e{mean, Vec(mean.size(), -60.0)};
    return e;
}

CompositeGaussian point_composite(Vec mean) {
    return {mean, Vec(mean.size(), std::exp(-60.0)), 0.0};
}

struct Stats {
    double mean = 0.0;
    double se = 0.0;
};

template <typename F>
Stats stats_over(std::size_t n, F f) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = f(i);
        s += v;
        s2 += v * v;
    }
    const double m = s / static_cast<double>(n);
    const double var = (s2 / static_cast<double>(n) - m * m) * static_cast<double>(n) / static_cast<double>(n - 1);
    return {m, std::sqrt(var / static_cast<double>(n))};
}

}  // namespace

TEST(SimMpc, DegenerateTargetAtMean) {
    const SimConfig cfg{7, 1};
    EXPECT_NEAR(sim_mpc(std_composite(1), point({0.0}), cfg, 3), -0.9189385332046727, 1e-12);
    EXPECT_NEAR(sim_mpc(std_composite(1, -2.0), point({0.0}), cfg, 3), -2.9189385332046727, 1e-12);
}

TEST(SimMpc, LogZShiftIsExact) {
    Rng rng(1);
    const SimConfig cfg{5, 2};
    for (int trial = 0; trial < 20; ++trial) {
        CompositeGaussian c = compose_many(std::vector{test::random_embedding(rng, 4), test::random_embedding(rng, 4)});
        const ProbEmbedding t = test::random_embedding(rng, 4);
        const double base = sim_mpc(c, t, cfg, trial);
        const double shift = rng.normal() * 3.0;
        c.log_z += shift;
        EXPECT_NEAR(sim_mpc(c, t, cfg, trial), base + shift, 1e-12 * (1.0 + std::abs(base)));
    }
}

TEST(SimMpc, DimensionMismatch) {
    EXPECT_THROW(sim_mpc(std_composite(2), point({0.0}), SimConfig{}, 0), Error);
    EXPECT_THROW(closed_form_expected_sim(std_composite(2), point({0.0})), Error);
}

TEST(SimMpc, DeterministicPerStream) {
    Rng rng(2);
    const auto c = to_composite(test::random_embedding(rng, 3));
    const auto t = test::random_embedding(rng, 3);
    const SimConfig cfg{7, 9};
    EXPECT_EQ(sim_mpc(c, t, cfg, 4), sim_mpc(c, t, cfg, 4));
    EXPECT_NE(sim_mpc(c, t, cfg, 4), sim_mpc(c, t, cfg, 5));
}

TEST(SimMpc, UnbiasedOverStreams) {
    Rng rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        const auto c = compose_many(std::vector{test::random_embedding(rng, 3), test::random_embedding(rng, 3)});
        const auto t = test::random_embedding(rng, 3);
        const SimConfig cfg{7, static_cast<std::uint64_t>(trial)};
        const Stats st = stats_over(2000, [&](std::size_t s) { return sim_mpc(c, t, cfg, s); });
        EXPECT_LE(std::abs(st.mean - expected_sim_oracle(c, t)), 4.0 * st.se);
    }
}

TEST(SimMpc, LargeJConverges) {
    Rng rng(4);
    const auto c = to_composite(test::random_embedding(rng, 2));
    const auto t = test::random_embedding(rng, 2);
    const SimConfig cfg{1000, 11};
    const Stats st = stats_over(100, [&](std::size_t s) { return sim_mpc(c, t, cfg, s); });
    EXPECT_LE(std::abs(st.mean - closed_form_expected_sim(c, t)), 3.0 * st.se);
}

TEST(ClosedForm, Examples) {
    const ProbEmbedding t{{0.0}, {0.0}};
    EXPECT_NEAR(closed_form_expected_sim(std_composite(1), t), -0.5 * kLog2Pi - 0.5, 1e-14);
    EXPECT_NEAR(closed_form_expected_sim(std_composite(1), t), -1.4189385332046727, 1e-12);
    // Separability across dimensions.
    EXPECT_NEAR(closed_form_expected_sim(std_composite(2), ProbEmbedding{{0.0, 0.0}, {0.0, 0.0}}),
                2.0 * closed_form_expected_sim(std_composite(1), t), 1e-14);
    // Zero-variance target collapses to the log-density at its mean.
    const CompositeGaussian c{{0.3}, {2.0}, -0.7};
    EXPECT_NEAR(closed_form_expected_sim(c, point({1.1})), gaussian_log_pdf(Vec{1.1}, c.mean, c.var) - 0.7, 1e-12);
}

TEST(ClosedForm, MatchesIndependentOracle) {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        auto c = compose_many(std::vector{test::random_embedding(rng, 5), test::random_embedding(rng, 5)});
        const auto t = test::random_embedding(rng, 5);
        EXPECT_LE(test::rel_err(closed_form_expected_sim(c, t), expected_sim_oracle(c, t)), 1e-12);
    }
}

TEST(ClosedForm, StandardNormalMonteCarloCrossCheck) {
    const SimConfig cfg{1, 0};
    const ProbEmbedding t{{0.0}, {0.0}};
    const auto c = std_composite(1);
    double s = 0.0;
    const std::size_t n = 1'000'000;
    for (std::size_t i = 0; i < n; ++i) s += gaussian_log_pdf(sample(t, cfg, 77, i), c.mean, c.var);
    // Per-draw sd of log N(z;0,1) for z~N(0,1) is sqrt(1/2).
    EXPECT_NEAR(s / static_cast<double>(n), closed_form_expected_sim(c, t), 4.0 * std::sqrt(0.5 / n));
}

TEST(SimMcPairwise, DegenerateIdenticalAndOpposite) {
    const SimConfig cfg{5, 3};
    EXPECT_NEAR(sim_mc_pairwise(point_composite({1.0, -2.0}), point({1.0, -2.0}), cfg, 1, 2), 1.0, 1e-12);
    EXPECT_NEAR(sim_mc_pairwise(point_composite({1.0, -2.0}), point({-1.0, 2.0}), cfg, 1, 2), -1.0, 1e-12);
}

TEST(SimMcPairwise, SingleSampleIsPlainCosine) {
    Rng rng(6);
    const auto a = to_composite(test::random_embedding(rng, 4));
    const auto b = test::random_embedding(rng, 4);
    const SimConfig cfg{1, 5};
    EXPECT_NEAR(sim_mc_pairwise(a, b, cfg, 10, 20), cosine(sample(a, cfg, 10, 0), sample(b, cfg, 20, 0)), 1e-14);
}

TEST(SimMcPairwise, BoundedAndDeterministic) {
    Rng rng(7);
    const SimConfig cfg{6, 1};
    for (int trial = 0; trial < 50; ++trial) {
        const auto a = to_composite(test::random_embedding(rng, 3, 1.5));
        const auto b = test::random_embedding(rng, 3, 1.5);
        const double s = sim_mc_pairwise(a, b, cfg, trial);
        EXPECT_GE(s, -1.0);
        EXPECT_LE(s, 1.0);
        EXPECT_EQ(s, sim_mc_pairwise(a, b, cfg, trial));
    }
}

TEST(SimMcPairwise, ZeroSampleThrows) {
    Matrix a(2, 2, 1.0), b(2, 2, 1.0);
    b(1, 0) = b(1, 1) = 0.0;
    try {
        pairwise_score(a, b);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ZeroVector);
    }
}

TEST(SimilarityKernels, MatchFullCalls) {
    Rng rng(8);
    const auto c = to_composite(test::random_embedding(rng, 3));
    const auto t = test::random_embedding(rng, 3);
    const SimConfig cfg{4, 2};
    const Matrix eps = noise_matrix(3, cfg, 9);
    EXPECT_NEAR(mpc_score(c, reparameterize(t, eps)), sim_mpc(c, t, cfg, 9), 1e-12);
}

TEST(SimilarityKernels, MpcScoreGradient) {
    Rng rng(9);
    CompositeGaussian c = compose_many(std::vector{test::random_embedding(rng, 3), test::random_embedding(rng, 3)});
    Matrix z(4, 3);
    for (double& v : z.data) v = rng.normal();
    CompositeGrad dc(3);
    Matrix dz(4, 3);
    mpc_score_backward(c, z, 1.0, dc, dz);
    const double h = 1e-6;
    auto fd = [&](double& x) {
        const double o = x;
        x = o + h;
        const double up = mpc_score(c, z);
        x = o - h;
        const double down = mpc_score(c, z);
        x = o;
        return (up - down) / (2 * h);
    };
    for (std::size_t d = 0; d < 3; ++d) {
        EXPECT_NEAR(dc.d_mean[d], fd(c.mean[d]), 1e-6);
        EXPECT_NEAR(dc.d_var[d], fd(c.var[d]), 1e-6);
    }
    EXPECT_NEAR(dc.d_log_z, fd(c.log_z), 1e-6);
    for (std::size_t i = 0; i < z.data.size(); ++i) EXPECT_NEAR(dz.data[i], fd(z.data[i]), 1e-6);
}

TEST(SimilarityKernels, PairwiseScoreGradient) {
    Rng rng(10);
    Matrix a(3, 4), b(3, 4);
    for (double& v : a.data) v = rng.normal();
    for (double& v : b.data) v = rng.normal();
    Matrix da(3, 4), db(3, 4);
    pairwise_score_backward(a, b, 1.0, da, db);
    const double h = 1e-6;
    for (auto [m, g] : {std::pair{&a, &da}, std::pair{&b, &db}}) {
        for (std::size_t i = 0; i < m->data.size(); ++i) {
            const double o = m->data[i];
            m->data[i] = o + h;
            const double up = pairwise_score(a, b);
            m->data[i] = o - h;
            const double down = pairwise_score(a, b);
            m->data[i] = o;
            EXPECT_NEAR(g->data[i], (up - down) / (2 * h), 1e-7);
        }
    }
}

TEST(SimilarityKind, ParseRoundTrip) {
    for (auto k : {SimilarityKind::Mpc, SimilarityKind::McPairwise}) EXPECT_EQ(parse_similarity(to_string(k)), k);
    EXPECT_THROW(parse_similarity("dot"), Error);
}
