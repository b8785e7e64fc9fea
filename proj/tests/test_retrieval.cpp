#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mpc/error.hpp"
#include "mpc/retrieval.hpp"
#include "test_util.hpp"

using namespace mpc;

namespace {

Gallery random_gallery(Rng& rng, std::size_t n, std::size_t dim) {
    Gallery g(dim);
    for (std::size_t i = 0; i < n; ++i)
        g.add(100 + i, test::random_embedding(rng, dim), {static_cast<std::uint32_t>(i % 7)});
    return g;
}

CompositeGaussian query_from(Vec mean) { return {mean, Vec(mean.size(), 1.0), 0.0}; }

// Binomial(n, k) as a double via lgamma.
double log_choose(double n, double k) { return std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1); }

// Ignores the item and returns a fresh random direction per query.
class RandomEncoder final : public QueryEncoder {
public:
    explicit RandomEncoder(std::size_t dim) : dim_(dim) {}
    ProbEmbedding encode(const QueryItem&, std::size_t query_index, std::size_t) const override {
        Rng rng(stream_key({0x5eed, query_index}));
        return test::random_embedding(rng, dim_);
    }

private:
    std::size_t dim_;
};

}  // namespace

TEST(Gallery, AddValidatesAndCanonicalizes) {
    Gallery g(2);
    g.add(5, {{1.0, 2.0}, {0.0, 0.0}}, {3, 1, 3});
    EXPECT_EQ(g.concepts(0), (std::vector<std::uint32_t>{1, 3}));
    EXPECT_THROW(g.add(5, {{1.0, 2.0}, {0.0, 0.0}}, {1}), Error);
    EXPECT_THROW(g.add(6, {{1.0, 2.0}, {0.0, 0.0}}, {}), Error);
    EXPECT_THROW(g.add(7, {{1.0}, {0.0}}, {1}), Error);
}

TEST(ScoreAll, SingleRecordRanksFirst) {
    Gallery g(2);
    g.add(42, {{0.3, 0.4}, {0.0, 0.0}}, {1});
    const auto r = score_all(query_from({1.0, 0.0}), g);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].id, 42u);
}

TEST(ScoreAll, ExactMatchScoresOne) {
    Rng rng(1);
    Gallery g = random_gallery(rng, 50, 6);
    const ProbEmbedding target = g.embedding(17);
    const auto r = score_all(query_from(target.mean), g);
    EXPECT_EQ(r[0].id, g.id(17));
    EXPECT_NEAR(r[0].score, 1.0, 1e-12);
}

TEST(ScoreAll, ScaleInvariantRanking) {
    Rng rng(2);
    const Gallery g = random_gallery(rng, 100, 5);
    Vec q(5);
    for (double& v : q) v = rng.normal();
    Vec q5 = q;
    for (double& v : q5) v *= 5.0;
    const auto a = score_all(query_from(q), g), b = score_all(query_from(q5), g);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].id, b[i].id);
}

TEST(ScoreAll, TiesBreakByAscendingIdAndPermutationInvariant) {
    Gallery g(2), h(2);
    const ProbEmbedding same{{1.0, 1.0}, {0.0, 0.0}};
    for (std::uint64_t id : {9, 3, 7}) g.add(id, same, {1});
    for (std::uint64_t id : {7, 9, 3}) h.add(id, same, {1});
    const auto r = score_all(query_from({1.0, 0.5}), g);
    EXPECT_EQ(r[0].id, 3u);
    EXPECT_EQ(r[1].id, 7u);
    EXPECT_EQ(r[2].id, 9u);
    EXPECT_EQ(r, score_all(query_from({1.0, 0.5}), h));
}

TEST(ScoreAll, ParallelEqualsSingleThreaded) {
    Rng rng(3);
    const Gallery g = random_gallery(rng, 1001, 8);
    Vec q(8);
    for (double& v : q) v = rng.normal();
    const auto single = score_all(query_from(q), g, 1);
    for (std::size_t t : {2u, 3u, 8u, 64u}) EXPECT_EQ(score_all(query_from(q), g, t), single);
}

TEST(ScoreAll, ZeroVectorAndDimensionErrors) {
    Gallery g(2);
    g.add(1, {{1.0, 0.0}, {0.0, 0.0}}, {1});
    EXPECT_THROW(score_all(query_from({0.0, 0.0}), g), Error);
    EXPECT_THROW(score_all(query_from({1.0, 0.0, 0.0}), g), Error);
    Gallery z(2);
    z.add(2, {{0.0, 0.0}, {0.0, 0.0}}, {1});
    EXPECT_THROW(score_all(query_from({1.0, 0.0}), z), Error);
}

TEST(TopK, TruncatesRanking) {
    Rng rng(4);
    const Gallery g = random_gallery(rng, 30, 4);
    const auto q = query_from({1.0, 2.0, 3.0, 4.0});
    const auto all = score_all(q, g);
    const auto top = top_k(q, g, 5);
    ASSERT_EQ(top.size(), 5u);
    EXPECT_TRUE(std::equal(top.begin(), top.end(), all.begin()));
    EXPECT_EQ(top_k(q, g, 100).size(), 30u);
}

TEST(RecallAtK, Examples) {
    const std::vector<Ranking> one{{5, 6, 1, 7, 8}};
    const std::vector<Relevant> truth_one{{1}};
    EXPECT_EQ(recall_at_k(one, truth_one, 5), 1.0);
    EXPECT_EQ(recall_at_k(one, truth_one, 2), 0.0);

    const std::vector<Ranking> hits{{1, 2}, {3, 4}};
    const std::vector<Relevant> hits_truth{{1}, {3}};
    for (std::size_t k : {1u, 2u, 10u}) EXPECT_EQ(recall_at_k(hits, hits_truth, k), 1.0);

    Ranking r1, r2;
    for (std::uint64_t i = 0; i < 20; ++i) r1.push_back(i), r2.push_back(i);
    const std::vector<Ranking> two{r1, r2};
    const std::vector<Relevant> t2{{0}, {10}};  // ranks 1 and 11
    EXPECT_EQ(recall_at_k(two, t2, 10), 0.5);
    EXPECT_THROW(recall_at_k(two, t2, 0), Error);
}

TEST(RPrecision, Examples) {
    const std::vector<Ranking> r{{1, 9, 2, 8}};
    const std::vector<Relevant> t{{1, 2}};
    EXPECT_EQ(r_precision(r, t), 0.5);
    const std::vector<Ranking> first{{1, 2, 9}};
    EXPECT_EQ(r_precision(first, t), 1.0);
    const std::vector<Ranking> both{{1, 5}, {5, 1}};
    const std::vector<Relevant> tb{{1}, {1}};
    EXPECT_EQ(r_precision(both, tb), 0.5);
    const std::vector<Relevant> empty{{}};
    try {
        r_precision(first, empty);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyGroundTruth);
    }
}

TEST(Metrics, RangeAndMonotonicity) {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Ranking> rankings;
        std::vector<Relevant> truth;
        for (int q = 0; q < 10; ++q) {
            Ranking r(30);
            std::iota(r.begin(), r.end(), 0);
            rng.shuffle(r);
            Relevant rel;
            const std::size_t n = 1 + rng.below(5);
            while (rel.size() < n) rel.insert(rng.below(30));
            rankings.push_back(r);
            truth.push_back(rel);
        }
        double prev = 0.0;
        for (std::size_t k = 1; k <= 30; ++k) {
            const double v = recall_at_k(rankings, truth, k);
            EXPECT_GE(v, prev);
            EXPECT_LE(v, 1.0);
            prev = v;
        }
        EXPECT_EQ(prev, 1.0);
        const double rp = r_precision(rankings, truth);
        EXPECT_GE(rp, 0.0);
        EXPECT_LE(rp, 1.0);
    }
}

TEST(ChanceRecall, MatchesHypergeometricOracle) {
    for (auto [g, r, k] : {std::array<std::size_t, 3>{1000, 1, 10}, {1000, 5, 10}, {50, 3, 7}, {20, 1, 20}}) {
        const double oracle =
            1.0 - std::exp(log_choose(double(g - r), double(k)) - log_choose(double(g), double(k)));
        EXPECT_NEAR(chance_recall_at_k(g, r, k), oracle, 1e-9);
    }
    EXPECT_NEAR(chance_recall_at_k(1000, 1, 10), 0.01, 1e-12);
}

TEST(EvalRun, OracleStubHitsAtRankOne) {
    // Every concept pair appears in exactly one image.
    AnnotationSet ann;
    std::uint64_t id = 1;
    for (std::uint32_t a = 0; a < 6; ++a)
        for (std::uint32_t b = a + 1; b < 6; ++b) ann.entries.push_back({id++, {a, b}});
    std::vector<std::uint64_t> ids;
    for (const auto& e : ann.entries) ids.push_back(e.image_id);
    const Gallery g = build_oracle_gallery(ann, ids, 6);
    std::vector<ConceptTuple> comps;
    for (const auto& e : ann.entries) comps.push_back(e.categories);
    const auto queries = generate_queries(comps, 2, 40, 1);
    const ConceptOracleEncoder enc(6);
    const EvalReport rep = eval_run(enc, queries, g, ComposerKind::Product);
    EXPECT_EQ(rep.num_queries, 40u);
    EXPECT_EQ(rep.recall_at.at(1), 1.0);
    EXPECT_EQ(rep.r_precision, 1.0);
    const EvalReport again = eval_run(enc, queries, g, ComposerKind::Product);
    EXPECT_EQ(again.recall_at, rep.recall_at);
}

TEST(EvalRun, RandomStubIsNearChance) {
    const std::size_t G = 1000, D = 8;
    Gallery g(D);
    Rng rng(6);
    for (std::size_t i = 0; i < G; ++i) g.add(i, test::random_embedding(rng, D), {static_cast<std::uint32_t>(i)});
    std::vector<ConceptTuple> comps;
    for (std::uint32_t c = 0; c < G; ++c) comps.push_back({c});
    const auto queries = generate_queries(comps, 1, 4000, 2);
    const std::vector<std::size_t> ks{1, 10};
    const EvalReport rep = eval_run(RandomEncoder(D), queries, g, ComposerKind::Product, nullptr, ks);
    const double p = chance_recall_at_k(G, 1, 10);
    EXPECT_NEAR(rep.recall_at.at(10), p, 4.0 * std::sqrt(p * (1 - p) / 4000.0));
}

TEST(EvalRun, SkipsNothingAndParallelMatches) {
    Rng rng(7);
    AnnotationSet ann;
    for (std::uint64_t i = 1; i <= 60; ++i)
        ann.entries.push_back({i, {static_cast<std::uint32_t>(i % 4), static_cast<std::uint32_t>(4 + i % 3)}});
    std::vector<std::uint64_t> ids;
    for (const auto& e : ann.entries) ids.push_back(e.image_id);
    const Gallery g = build_oracle_gallery(ann, ids, 7);
    EXPECT_EQ(g.size(), 60u);
    EXPECT_EQ(relevant_ids(g, std::vector<std::uint32_t>{1, 5}).size(), 5u);
    const auto queries = generate_queries(std::vector<ConceptTuple>{{1, 5}, {0, 4}}, 2, 20, 3);
    const ConceptOracleEncoder enc(7);
    const EvalReport a = eval_run(enc, queries, g, ComposerKind::Product, nullptr, {}, 1);
    const EvalReport b = eval_run(enc, queries, g, ComposerKind::Product, nullptr, {}, 4);
    EXPECT_EQ(a.recall_at, b.recall_at);
    EXPECT_EQ(a.r_precision, b.r_precision);
    EXPECT_EQ(a.recall_at.size(), 3u);
}

TEST(GalleryFile, RoundTripIsByteIdentical) {
    Rng rng(8);
    const Gallery g = random_gallery(rng, 20, 5);
    const std::string bytes = encode_gallery(g);
    const Gallery back = decode_gallery(bytes);
    EXPECT_EQ(back, g);
    EXPECT_EQ(encode_gallery(back), bytes);
    EXPECT_EQ(bytes.size(), 4u + 4 + 4 + 8 + 20 * (8 + 2 + 4 + 5 * 4 * 2));

    const Gallery empty(5);
    EXPECT_EQ(decode_gallery(encode_gallery(empty)), empty);

    const auto path = std::filesystem::temp_directory_path() / "mpc_gallery_test.mpce";
    write_gallery(g, path.string());
    EXPECT_EQ(read_gallery(path.string()), g);
    std::filesystem::remove(path);
}

TEST(GalleryFile, Corruption) {
    Rng rng(9);
    const std::string bytes = encode_gallery(random_gallery(rng, 3, 2));
    auto code_of = [](const std::string& b) {
        try {
            decode_gallery(b);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::Io;
    };
    std::string bad = bytes;
    bad[0] = 'X';
    EXPECT_EQ(code_of(bad), ErrorCode::BadMagic);
    std::string ver = bytes;
    ver[4] = 2;
    EXPECT_EQ(code_of(ver), ErrorCode::VersionMismatch);
    EXPECT_EQ(code_of(bytes.substr(0, bytes.size() - 3)), ErrorCode::TruncatedFile);
    EXPECT_EQ(code_of(bytes.substr(0, 10)), ErrorCode::TruncatedFile);
    EXPECT_THROW(read_gallery("/nonexistent/dir/g.mpce"), Error);
}

TEST(ModalityMix, ParseAndApply) {
    for (auto m : {ModalityMix::Image, ModalityMix::Text, ModalityMix::Mixed})
        EXPECT_EQ(parse_modality_mix(to_string(m)), m);
    EXPECT_THROW(parse_modality_mix("audio"), Error);
    auto qs = generate_queries(std::vector<ConceptTuple>{{0, 1}}, 2, 50, 1);
    const auto mixed = qs;
    apply_modality_mix(qs, ModalityMix::Mixed);
    for (std::size_t i = 0; i < qs.size(); ++i) EXPECT_EQ(qs[i].set.items, mixed[i].set.items);
    apply_modality_mix(qs, ModalityMix::Text);
    for (const auto& q : qs)
        for (const auto& it : q.set.items) EXPECT_EQ(it.modality, Modality::Text);
}
