#include "mpc/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "mpc/error.hpp"
#include "mpc/rng.hpp"

namespace mpc {

void Gallery::add(std::uint64_t id, const ProbEmbedding& e, std::vector<std::uint32_t> concepts) {
    validate(e);
    if (dim_ == 0 && ids_.empty()) dim_ = e.dim();
    if (e.dim() != dim_)
        throw Error(ErrorCode::DimensionMismatch, "gallery dimension " + std::to_string(dim_) + " but embedding has " +
                                                      std::to_string(e.dim()));
    if (concepts.empty()) throw Error(ErrorCode::InvalidArgument, "gallery record " + std::to_string(id) + " has no concepts");
    if (!id_set_.insert(id).second) throw Error(ErrorCode::InvalidArgument, "duplicate gallery id " + std::to_string(id));
    std::sort(concepts.begin(), concepts.end());
    concepts.erase(std::unique(concepts.begin(), concepts.end()), concepts.end());
    ids_.push_back(id);
    concepts_.push_back(std::move(concepts));
    for (double v : e.mean) means_.push_back(static_cast<float>(v));
    for (double v : e.log_var) log_vars_.push_back(static_cast<float>(v));
}

ProbEmbedding Gallery::embedding(std::size_t i) const {
    ProbEmbedding e;
    const auto m = mean(i);
    const auto lv = log_var(i);
    e.mean.assign(m.begin(), m.end());
    e.log_var.assign(lv.begin(), lv.end());
    return e;
}

Gallery build_gallery(const ModelParams& model, const TokenProvider& tokens, std::span<const std::uint64_t> image_ids) {
    Gallery g(model.embed_dim());
    for (std::uint64_t id : image_ids) {
        const AnnotationEntry* e = tokens.annotations().find(id);
        if (e == nullptr) throw Error(ErrorCode::InvalidArgument, "image " + std::to_string(id) + " is not annotated");
        g.add(id, embed_head(tokens.image(id), model.image_head), e->categories);
    }
    return g;
}

std::vector<Scored> score_all(std::span<const double> q, const Gallery& gallery, std::size_t threads) {
    if (gallery.empty()) throw Error(ErrorCode::InvalidArgument, "cannot score against an empty gallery");
    if (q.size() != gallery.dim())
        throw Error(ErrorCode::DimensionMismatch, "query dimension " + std::to_string(q.size()) + " != gallery dimension " +
                                                      std::to_string(gallery.dim()));
    const double qn = norm(q);
    if (qn == 0.0) throw Error(ErrorCode::ZeroVector, "query mean has zero norm");

    const std::size_t n = gallery.size(), D = gallery.dim();
    std::vector<Scored> out(n);
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto m = gallery.mean(i);
            double ab = 0.0, bb = 0.0;
            for (std::size_t d = 0; d < D; ++d) {
                const double v = static_cast<double>(m[d]);
                ab += q[d] * v;
                bb += v * v;
            }
            if (bb == 0.0)
                throw Error(ErrorCode::ZeroVector, "gallery record " + std::to_string(gallery.id(i)) + " has zero-norm mean");
            out[i] = {gallery.id(i), ab / (qn * std::sqrt(bb))};
        }
    };
    threads = std::clamp<std::size_t>(threads, 1, n);
    if (threads == 1) {
        work(0, n);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(threads);
        const std::size_t chunk = (n + threads - 1) / threads;
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                try {
                    work(std::min(n, t * chunk), std::min(n, (t + 1) * chunk));
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
    std::sort(out.begin(), out.end(), [](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    return out;
}

std::vector<Scored> score_all(const CompositeGaussian& query, const Gallery& gallery, std::size_t threads) {
    return score_all(std::span<const double>(query.mean), gallery, threads);
}

std::vector<Scored> top_k(const CompositeGaussian& query, const Gallery& gallery, std::size_t k, std::size_t threads) {
    auto all = score_all(query, gallery, threads);
    if (k < all.size()) all.resize(k);
    return all;
}

double recall_at_k(std::span<const Ranking> rankings, std::span<const Relevant> truth, std::size_t k) {
    if (k == 0) throw Error(ErrorCode::InvalidArgument, "K must be >= 1");
    if (rankings.size() != truth.size()) throw Error(ErrorCode::InvalidArgument, "rankings and truth differ in length");
    if (rankings.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t q = 0; q < rankings.size(); ++q) {
        const std::size_t lim = std::min(k, rankings[q].size());
        for (std::size_t r = 0; r < lim; ++r) {
            if (truth[q].count(rankings[q][r]) != 0) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(rankings.size());
}

double r_precision(std::span<const Ranking> rankings, std::span<const Relevant> truth) {
    if (rankings.size() != truth.size()) throw Error(ErrorCode::InvalidArgument, "rankings and truth differ in length");
    if (rankings.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t q = 0; q < rankings.size(); ++q) {
        const std::size_t R = truth[q].size();
        if (R == 0) throw Error(ErrorCode::EmptyGroundTruth, "query " + std::to_string(q) + " has no relevant items");
        const std::size_t lim = std::min(R, rankings[q].size());
        std::size_t correct = 0;
        for (std::size_t r = 0; r < lim; ++r) correct += truth[q].count(rankings[q][r]);
        total += static_cast<double>(correct) / static_cast<double>(R);
    }
    return total / static_cast<double>(rankings.size());
}

ModelQueryEncoder::ModelQueryEncoder(const ModelParams& model, const TokenProvider& tokens,
                                     std::span<const std::uint64_t> image_pool, std::uint64_t seed)
    : model_(&model), tokens_(&tokens), pool_(tokens.annotations(), image_pool), seed_(seed) {}

TokenSet ModelQueryEncoder::tokens_for(const QueryItem& item, std::size_t query_index, std::size_t position) const {
    const std::uint64_t key = stream_key({seed_, 0xe7a1, query_index, position});
    if (item.modality == Modality::Text) return tokens_->text(item.concept_id, key);
    const auto imgs = pool_.images_with(item.concept_id);
    if (imgs.empty())
        throw Error(ErrorCode::InvalidArgument, "no pool image contains concept " + std::to_string(item.concept_id));
    return tokens_->crop(imgs[splitmix64(key) % imgs.size()], item.concept_id);
}

ProbEmbedding ModelQueryEncoder::encode(const QueryItem& item, std::size_t query_index, std::size_t position) const {
    return embed_head(tokens_for(item, query_index, position), model_->head(item.modality));
}

ProbEmbedding ConceptOracleEncoder::encode(const QueryItem& item, std::size_t, std::size_t) const {
    if (item.concept_id >= dim_) throw Error(ErrorCode::InvalidArgument, "oracle dimension too small for concept id");
    ProbEmbedding e{Vec(dim_, 0.0), Vec(dim_, 0.0)};
    e.mean[item.concept_id] = 1.0;
    return e;
}

Gallery build_oracle_gallery(const AnnotationSet& ann, std::span<const std::uint64_t> image_ids, std::size_t dim) {
    Gallery g(dim);
    for (std::uint64_t id : image_ids) {
        const AnnotationEntry* e = ann.find(id);
        if (e == nullptr) throw Error(ErrorCode::InvalidArgument, "image " + std::to_string(id) + " is not annotated");
        ProbEmbedding emb{Vec(dim, 0.0), Vec(dim, 0.0)};
        for (std::uint32_t c : e->categories) {
            if (c >= dim) throw Error(ErrorCode::InvalidArgument, "oracle dimension too small for concept id");
            emb.mean[c] = 1.0;
        }
        g.add(id, emb, e->categories);
    }
    return g;
}

Relevant relevant_ids(const Gallery& gallery, std::span<const std::uint32_t> truth) {
    Relevant rel;
    for (std::size_t i = 0; i < gallery.size(); ++i) {
        const auto& c = gallery.concepts(i);
        if (std::includes(c.begin(), c.end(), truth.begin(), truth.end())) rel.insert(gallery.id(i));
    }
    return rel;
}

EvalReport eval_run(const QueryEncoder& encoder, std::span<const Query> queries, const Gallery& gallery,
                    ComposerKind composer, const FusionParams* fusion, std::span<const std::size_t> ks,
                    std::size_t threads) {
    static constexpr std::size_t kDefaultKs[] = {1, 5, 10};
    if (ks.empty()) ks = kDefaultKs;
    std::vector<Ranking> rankings;
    std::vector<Relevant> truth;
    rankings.reserve(queries.size());
    truth.reserve(queries.size());
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        const Query& q = queries[qi];
        validate(q.set);
        std::vector<ProbEmbedding> items;
        for (std::size_t pos = 0; pos < q.set.items.size(); ++pos) items.push_back(encoder.encode(q.set.items[pos], qi, pos));
        const CompositeGaussian c = compose(composer, items, fusion);
        const auto scored = score_all(c, gallery, threads);
        Ranking r;
        r.reserve(scored.size());
        for (const auto& s : scored) r.push_back(s.id);
        rankings.push_back(std::move(r));
        truth.push_back(relevant_ids(gallery, q.truth));
    }
    EvalReport rep;
    rep.num_queries = queries.size();
    for (std::size_t k : ks) rep.recall_at[k] = recall_at_k(rankings, truth, k);
    rep.r_precision = r_precision(rankings, truth);
    return rep;
}

std::string_view to_string(ModalityMix m) {
    switch (m) {
        case ModalityMix::Image: return "image";
        case ModalityMix::Text: return "text";
        case ModalityMix::Mixed: return "mixed";
    }
    return "?";
}

ModalityMix parse_modality_mix(std::string_view s) {
    if (s == "image") return ModalityMix::Image;
    if (s == "text") return ModalityMix::Text;
    if (s == "mixed") return ModalityMix::Mixed;
    throw Error(ErrorCode::InvalidArgument, "unknown modality mix '" + std::string(s) + "'");
}

void apply_modality_mix(std::vector<Query>& queries, ModalityMix mix) {
    if (mix == ModalityMix::Mixed) return;
    const Modality m = mix == ModalityMix::Image ? Modality::Image : Modality::Text;
    for (auto& q : queries)
        for (auto& item : q.set.items) item.modality = m;
}

double chance_recall_at_k(std::size_t G, std::size_t R, std::size_t k) {
    if (R == 0) return 0.0;
    if (k + R > G) return 1.0;
    // C(G-R, k) / C(G, k) = prod_{i<k} (G-R-i) / (G-i)
    double miss = 1.0;
    for (std::size_t i = 0; i < k; ++i)
        miss *= static_cast<double>(G - R - i) / static_cast<double>(G - i);
    return 1.0 - miss;
}

}  // namespace mpc
