#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mpc/benchgen.hpp"
#include "mpc/composer.hpp"
#include "mpc/data_source.hpp"
#include "mpc/model.hpp"

namespace mpc {

// Image embeddings stored structure-of-arrays at f32: means for record i
// occupy means[i*D, (i+1)*D).
class Gallery {
public:
    Gallery() = default;
    explicit Gallery(std::size_t dim) : dim_(dim) {}

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return ids_.size(); }
    bool empty() const { return ids_.empty(); }

    // Throws InvalidArgument on duplicate id or empty concept set.
    void add(std::uint64_t id, const ProbEmbedding& e, std::vector<std::uint32_t> concepts);

    std::uint64_t id(std::size_t i) const { return ids_[i]; }
    const std::vector<std::uint32_t>& concepts(std::size_t i) const { return concepts_[i]; }
    std::span<const float> mean(std::size_t i) const { return {means_.data() + i * dim_, dim_}; }
    std::span<const float> log_var(std::size_t i) const { return {log_vars_.data() + i * dim_, dim_}; }
    ProbEmbedding embedding(std::size_t i) const;

    bool operator==(const Gallery&) const = default;

private:
    std::size_t dim_ = 0;
    std::vector<std::uint64_t> ids_;
    std::vector<std::vector<std::uint32_t>> concepts_;
    std::vector<float> means_;
    std::vector<float> log_vars_;
    std::set<std::uint64_t> id_set_;
};

// Embeds every listed image with the image head.
Gallery build_gallery(const ModelParams& model, const TokenProvider& tokens, std::span<const std::uint64_t> image_ids);

// MPCE gallery file. See README for the byte layout.
inline constexpr std::uint32_t kGalleryFormatVersion = 1;
std::string encode_gallery(const Gallery& g);
Gallery decode_gallery(std::string_view bytes, const std::string& what = "MPCE");
void write_gallery(const Gallery& g, const std::string& path);
Gallery read_gallery(const std::string& path);

struct Scored {
    std::uint64_t id = 0;
    double score = 0.0;
    bool operator==(const Scored&) const = default;
};

// Cosine between the query mean and every record mean, sorted by descending
// score with ties broken by ascending id. Shards the scan over `threads`.
std::vector<Scored> score_all(std::span<const double> query_mean, const Gallery& gallery, std::size_t threads = 1);
std::vector<Scored> score_all(const CompositeGaussian& query, const Gallery& gallery, std::size_t threads = 1);

// First `k` entries of score_all (all of them when k exceeds the gallery).
std::vector<Scored> top_k(const CompositeGaussian& query, const Gallery& gallery, std::size_t k,
                          std::size_t threads = 1);

using Ranking = std::vector<std::uint64_t>;
using Relevant = std::set<std::uint64_t>;

// Fraction of queries with at least one relevant id among the first K.
double recall_at_k(std::span<const Ranking> rankings, std::span<const Relevant> truth, std::size_t k);

// Mean over queries of (relevant in top R) / R with R = |truth|.
// Throws EmptyGroundTruth if a query has no relevant item.
double r_precision(std::span<const Ranking> rankings, std::span<const Relevant> truth);

struct EvalReport {
    std::map<std::size_t, double> recall_at;
    double r_precision = 0.0;
    std::size_t num_queries = 0;
};

// Produces the embedding of one query item. query_index/position let
// implementations draw deterministic per-item randomness.
class QueryEncoder {
public:
    virtual ~QueryEncoder() = default;
    virtual ProbEmbedding encode(const QueryItem& item, std::size_t query_index, std::size_t position) const = 0;
};

// Embeds items with the trained heads. Image items use a crop of the concept
// from a randomly chosen pool image that contains it.
class ModelQueryEncoder final : public QueryEncoder {
public:
    ModelQueryEncoder(const ModelParams& model, const TokenProvider& tokens,
                      std::span<const std::uint64_t> image_pool, std::uint64_t seed);

    ProbEmbedding encode(const QueryItem& item, std::size_t query_index, std::size_t position) const override;
    TokenSet tokens_for(const QueryItem& item, std::size_t query_index, std::size_t position) const;

private:
    const ModelParams* model_;
    const TokenProvider* tokens_;
    ConceptIndex pool_;
    std::uint64_t seed_;
};

// Test stub: concept c maps to the c-th basis vector; pair with
// build_oracle_gallery, whose record means are concept-indicator sums.
class ConceptOracleEncoder final : public QueryEncoder {
public:
    explicit ConceptOracleEncoder(std::size_t dim) : dim_(dim) {}
    ProbEmbedding encode(const QueryItem& item, std::size_t query_index, std::size_t position) const override;

private:
    std::size_t dim_;
};

Gallery build_oracle_gallery(const AnnotationSet& ann, std::span<const std::uint64_t> image_ids, std::size_t dim);

// Relevant gallery ids for a concept tuple: records containing all concepts.
Relevant relevant_ids(const Gallery& gallery, std::span<const std::uint32_t> truth);

EvalReport eval_run(const QueryEncoder& encoder, std::span<const Query> queries, const Gallery& gallery,
                    ComposerKind composer, const FusionParams* fusion = nullptr,
                    std::span<const std::size_t> ks = {}, std::size_t threads = 1);

enum class ModalityMix { Image, Text, Mixed };

std::string_view to_string(ModalityMix m);
ModalityMix parse_modality_mix(std::string_view s);  // throws InvalidArgument

// Forces every item to one modality; Mixed leaves the generated mix alone.
void apply_modality_mix(std::vector<Query>& queries, ModalityMix mix);

// Chance-level R@K for a random ranking: 1 - C(G-R, K) / C(G, K).
double chance_recall_at_k(std::size_t gallery_size, std::size_t relevant, std::size_t k);

}  // namespace mpc
