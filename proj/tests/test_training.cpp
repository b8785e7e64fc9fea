#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mpc/error.hpp"
#include "mpc/gradcheck.hpp"
#include "mpc/synth_world.hpp"
#include "mpc/training.hpp"
#include "test_util.hpp"

using namespace mpc;

namespace {

Matrix scores2(double diag, double off) {
    Matrix s(2, 2, off);
    s(0, 0) = s(1, 1) = diag;
    return s;
}

std::vector<ProbEmbedding> one_dim(std::initializer_list<double> log_vars) {
    std::vector<ProbEmbedding> row;
    for (double lv : log_vars) row.push_back({{0.0}, {lv}});
    return row;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST(ContrastiveLoss, Examples) {
    EXPECT_EQ(contrastive_loss(Matrix(1, 1, 3.7)), 0.0);
    EXPECT_NEAR(contrastive_loss(scores2(1.5, 1.5)), std::log(2.0), 1e-15);
    const double naive = -std::log(std::exp(10.0) / (std::exp(10.0) + std::exp(0.0)));
    EXPECT_NEAR(contrastive_loss(scores2(10.0, 0.0)), naive, 1e-15);
    EXPECT_NEAR(contrastive_loss(scores2(10.0, 0.0)), 4.54e-5, 1e-7);
}

TEST(ContrastiveLoss, StableForHugeScores) {
    const double l = contrastive_loss(scores2(1000.0, 990.0));
    EXPECT_NEAR(l, std::log1p(std::exp(-10.0)), 1e-12);
}

TEST(ContrastiveLoss, NonnegativeAndGradientMatchesFiniteDifferences) {
    Rng rng(1);
    Matrix s(4, 4);
    for (double& v : s.data) v = 3.0 * rng.normal();
    EXPECT_GE(contrastive_loss(s), 0.0);
    const Matrix g = contrastive_loss_grad(s);
    for (std::size_t i = 0; i < s.data.size(); ++i) {
        const double o = s.data[i];
        s.data[i] = o + 1e-6;
        const double up = contrastive_loss(s);
        s.data[i] = o - 1e-6;
        const double down = contrastive_loss(s);
        s.data[i] = o;
        EXPECT_NEAR(g.data[i], (up - down) / 2e-6, 1e-8);
    }
}

TEST(ContrastiveLoss, NonSquareThrows) { EXPECT_THROW(contrastive_loss(Matrix(2, 3)), Error); }

TEST(LogVarRegularizer, Examples) {
    std::vector<std::vector<ProbEmbedding>> zero{one_dim({0.0, 0.0})};
    EXPECT_EQ(logvar_regularizer(zero), 0.0);
    std::vector<std::vector<ProbEmbedding>> one{one_dim({2.0})};
    EXPECT_DOUBLE_EQ(logvar_regularizer(one), 4.0);
    std::vector<std::vector<ProbEmbedding>> two{one_dim({1.0, 3.0})};
    EXPECT_DOUBLE_EQ(logvar_regularizer(two), 5.0);
    // Mean over dimensions keeps the scale independent of D.
    std::vector<std::vector<ProbEmbedding>> wide{{ProbEmbedding{{0, 0, 0, 0}, {2, 2, 2, 2}}}};
    EXPECT_DOUBLE_EQ(logvar_regularizer(wide), 4.0);
}

TEST(TotalLoss, Examples) {
    EXPECT_DOUBLE_EQ(total_loss(0.5, 4.0, 0.001), 0.504);
    EXPECT_EQ(total_loss(0.7, 9.0, 0.0), 0.7);
}

TEST(Adam, ZeroGradientLeavesParamsAndAdvancesStep) {
    ModelParams m = init_model({5, 3, 4}, false, 1);
    const ModelParams before = m;
    AdamState st = init_adam(m);
    optimizer_step(m, zeros_like(m), st, 0.01);
    EXPECT_EQ(m, before);
    EXPECT_EQ(st.step, 1u);
}

TEST(Adam, FirstStepMovesEachEntryByLearningRate) {
    ModelParams m = init_model({5, 3, 4}, true, 2);
    const ModelParams before = m;
    ModelParams g = zeros_like(m);
    Rng rng(3);
    for (auto& t : tensors(g))
        for (double& v : t.data) v = rng.normal();
    AdamState st = init_adam(m);
    const double lr = 1e-3;
    optimizer_step(m, g, st, lr);
    const auto after = tensors(static_cast<const ModelParams&>(m));
    const auto orig = tensors(before);
    const auto grads = tensors(static_cast<const ModelParams&>(g));
    for (std::size_t t = 0; t < after.size(); ++t) {
        for (std::size_t i = 0; i < after[t].data.size(); ++i) {
            // m_hat = g, v_hat = g^2 after bias correction.
            const double gi = grads[t].data[i];
            const double expected = orig[t].data[i] - lr * gi / (std::abs(gi) + kAdamEps);
            EXPECT_NEAR(after[t].data[i], expected, 1e-15);
            EXPECT_NEAR(std::abs(after[t].data[i] - orig[t].data[i]), lr, lr * kAdamEps / std::abs(gi) * 1.01);
        }
    }
}

TEST(Gradients, SingleRowWithoutRegularizerIsZero) {
    GradCheckInstance inst;
    inst.batch = 1;
    const ModelParams m = random_model(inst, false, 4);
    const Batch b = random_batch(inst, 5);
    TrainConfig cfg;
    cfg.lambda_l2 = 0.0;
    cfg.sim.j_samples = 3;
    const ModelParams g = gradients(m, b, cfg);
    for (const auto& t : tensors(g))
        for (double v : t.data) EXPECT_EQ(v, 0.0) << t.name;
    EXPECT_EQ(batch_loss(m, b, cfg).contrastive, 0.0);
}

TEST(Gradients, DeterministicGivenSeed) {
    GradCheckInstance inst;
    const ModelParams m = random_model(inst, false, 6);
    const Batch b = random_batch(inst, 7);
    TrainConfig cfg;
    cfg.sim.j_samples = 3;
    EXPECT_EQ(gradients(m, b, cfg), gradients(m, b, cfg));
}

class GradientCheck : public ::testing::TestWithParam<std::tuple<ComposerKind, SimilarityKind>> {};

TEST_P(GradientCheck, MatchesCentralDifferences) {
    const auto [composer, similarity] = GetParam();
    GradCheckInstance inst;
    const ModelParams m = random_model(inst, composer == ComposerKind::Mlp, 8);
    const Batch b = random_batch(inst, 9);
    TrainConfig cfg;
    cfg.composer = composer;
    cfg.similarity = similarity;
    cfg.lambda_l2 = 0.1;
    cfg.sim = {3, 10};
    const GradCheckReport r = check_gradients(m, b, cfg);
    const std::size_t expected_groups = composer == ComposerKind::Mlp ? 16 : 12;
    EXPECT_EQ(r.groups.size(), expected_groups);
    for (const auto& g : r.groups) EXPECT_LE(g.max_rel_error, 1e-4) << g.group;
}

INSTANTIATE_TEST_SUITE_P(AllConfigurations, GradientCheck,
                         ::testing::Combine(::testing::Values(ComposerKind::Product, ComposerKind::Addition,
                                                              ComposerKind::Mlp),
                                            ::testing::Values(SimilarityKind::Mpc, SimilarityKind::McPairwise)),
                         [](const auto& info) {
                             return std::string(to_string(std::get<0>(info.param))) + "_" +
                                    std::string(to_string(std::get<1>(info.param)));
                         });

TEST(BatchLoss, PermutationInvariant) {
    GradCheckInstance inst;
    inst.batch = 5;
    const ModelParams m = random_model(inst, false, 11);
    Batch b = random_batch(inst, 12);
    for (auto sim : {SimilarityKind::Mpc, SimilarityKind::McPairwise}) {
        TrainConfig cfg;
        cfg.similarity = sim;
        cfg.sim.j_samples = 4;
        const double base = batch_loss(m, b, cfg).total;
        Batch p = b;
        std::rotate(p.begin(), p.begin() + 2, p.end());
        std::swap(p[0], p[3]);
        EXPECT_NEAR(batch_loss(m, p, cfg).total, base, 1e-10);
    }
}

TEST(BatchLoss, RegularizerAloneShrinksLogVariances) {
    GradCheckInstance inst;
    inst.batch = 4;
    ModelParams m = random_model(inst, false, 13);
    const Batch b = random_batch(inst, 14);
    TrainConfig cfg;
    cfg.contrastive = false;
    cfg.lambda_l2 = 1.0;
    double prev = batch_loss(m, b, cfg).regularizer;
    EXPECT_GT(prev, 0.0);
    const double first = prev;
    for (int step = 0; step < 200; ++step) {
        const ModelParams g = gradients(m, b, cfg);
        auto ps = tensors(m);
        const auto gs = tensors(g);
        for (std::size_t t = 0; t < ps.size(); ++t)
            for (std::size_t i = 0; i < ps[t].data.size(); ++i) ps[t].data[i] -= 0.01 * gs[t].data[i];
        const LossBreakdown lb = batch_loss(m, b, cfg);
        EXPECT_EQ(lb.contrastive, 0.0);
        EXPECT_LT(lb.regularizer, prev) << "step " << step;
        prev = lb.regularizer;
    }
    EXPECT_LT(prev, 0.5 * first);
}

TEST(TrainConfig, JsonRoundTripAndValidation) {
    TrainConfig c;
    c.batch_size = 7;
    c.composer = ComposerKind::Mlp;
    c.similarity = SimilarityKind::McPairwise;
    c.sim = {5, 9};
    const TrainConfig back = train_config_from_json(train_config_to_json(c));
    EXPECT_EQ(back.batch_size, 7u);
    EXPECT_EQ(back.composer, ComposerKind::Mlp);
    EXPECT_EQ(back.similarity, SimilarityKind::McPairwise);
    EXPECT_EQ(back.sim.j_samples, 5u);
    c.batch_size = 0;
    EXPECT_THROW(validate(c), Error);
    EXPECT_THROW(train_config_from_json("{not json"), Error);
    const TrainConfig defaults;
    EXPECT_EQ(defaults.lambda_l2, 0.001);
    EXPECT_EQ(defaults.learning_rate, 2e-4);
}

namespace {

struct SmallSetup {
    SynthWorld world;
    Splits splits;
    std::vector<ConceptTuple> comps;
};

SmallSetup small_setup() {
    SynthWorldConfig wc;
    wc.num_concepts = 8;
    wc.token_dim = 6;
    wc.images_per_composition = 30;
    wc.seed = 3;
    SmallSetup s{SynthWorld::generate(wc), {}, {}};
    s.splits = split_images(s.world.annotations(), 1);
    s.comps = generate_compositions(s.world.annotations(), s.splits, 2, 10, {}, 1);
    return s;
}

}  // namespace

TEST(TrainLoop, ZeroStepsReturnsInitializationAndIsDeterministic) {
    const SmallSetup s = small_setup();
    const BatchSampler sampler(s.world, s.splits.train, s.comps);
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.embed_dim = 4;
    cfg.hidden_dim = 3;
    cfg.seed = 5;
    cfg.steps = 0;
    const TrainResult r0 = train_loop(sampler, cfg);
    EXPECT_EQ(r0.model, init_model({6, 3, 4}, false, cfg.seed));
    EXPECT_EQ(r0.losses.size(), 1u);

    cfg.steps = 20;
    const TrainResult a = train_loop(sampler, cfg), b = train_loop(sampler, cfg);
    EXPECT_EQ(a.losses, b.losses);
    EXPECT_EQ(a.model, b.model);
    EXPECT_EQ(a.losses.size(), 21u);
}

TEST(TrainLoop, DefaultWorldLossDropsByThirty) {
    const auto wc = synth_config_from_json(slurp(std::string(MPC_CONFIG_DIR) + "/synth_default.json"));
    TrainConfig cfg = train_config_from_json(slurp(std::string(MPC_CONFIG_DIR) + "/train_default.json"));
    ASSERT_EQ(wc.num_concepts, 20u);
    ASSERT_EQ(cfg.embed_dim, 32u);
    ASSERT_EQ(cfg.batch_size, 32u);
    cfg.steps = 2000;
    const SynthWorld world = SynthWorld::generate(wc);
    const Splits splits = split_images(world.annotations(), 3);
    const auto comps = generate_compositions(world.annotations(), splits, 2, 150, {}, 3);
    const TrainResult r = train_loop(BatchSampler(world, splits.train, comps), cfg);
    constexpr std::size_t window = 50;
    const double start = std::accumulate(r.losses.begin(), r.losses.begin() + window, 0.0) / window;
    const double end = std::accumulate(r.losses.end() - window, r.losses.end(), 0.0) / window;
    EXPECT_LT(end, r.losses.front());
    EXPECT_LE(end, 0.7 * start) << "start " << start << " end " << end;
}
