#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mpc/core_types.hpp"

namespace mpc {

using ConceptTuple = std::vector<std::uint32_t>;  // sorted ascending, distinct

struct AnnotationEntry {
    std::uint64_t image_id = 0;
    std::vector<std::uint32_t> categories;  // sorted ascending, distinct, nonempty

    bool operator==(const AnnotationEntry&) const = default;
};

struct AnnotationSet {
    std::vector<AnnotationEntry> entries;

    const AnnotationEntry* find(std::uint64_t image_id) const;
    std::vector<std::uint32_t> categories() const;  // sorted universe
};

// Canonicalizes category lists and checks unique ids / nonempty sets.
void validate(AnnotationSet& ann);

// JSON Lines: {"image_id": <u64>, "categories": [<u32>, ...]} per line.
AnnotationSet read_annotations_jsonl(const std::string& path);
void write_annotations_jsonl(const AnnotationSet& ann, const std::string& path);

// Posting lists from concept to the (sorted) images that contain it,
// restricted to a subset of images.
class ConceptIndex {
public:
    ConceptIndex() = default;
    ConceptIndex(const AnnotationSet& ann, std::span<const std::uint64_t> image_ids);
    explicit ConceptIndex(const AnnotationSet& ann);

    std::span<const std::uint64_t> images_with(std::uint32_t concept_id) const;
    std::vector<std::uint64_t> images_with_all(std::span<const std::uint32_t> concepts) const;
    std::size_t count_with_all(std::span<const std::uint32_t> concepts) const;
    std::span<const std::uint64_t> images() const { return images_; }

private:
    std::vector<std::uint64_t> images_;
    std::unordered_map<std::uint32_t, std::vector<std::uint64_t>> postings_;
};

struct Splits {
    std::vector<std::uint64_t> train;
    std::vector<std::uint64_t> val;
    std::vector<std::uint64_t> test;
};

// 4:1:1 random split, each list sorted ascending. Throws TooFewImages below 6.
Splits split_images(const AnnotationSet& ann, std::uint64_t seed);

struct Thresholds {
    std::size_t train = 8;
    std::size_t val = 2;
    std::size_t test = 2;
};

inline constexpr std::size_t kDefaultMaxAttempts = 1'000'000;

// Rejection sampler over k-subsets of categories. Emits tuples in acceptance
// order; throws ExhaustedSearch after max_attempts draws.
std::vector<ConceptTuple> generate_compositions(const AnnotationSet& ann, const Splits& splits, std::size_t k,
                                                std::size_t target_count, Thresholds thresholds,
                                                std::uint64_t seed,
                                                std::size_t max_attempts = kDefaultMaxAttempts);

struct UnseenSetup {
    std::vector<ConceptTuple> train_pairs;
    std::vector<ConceptTuple> test_pairs;
};

UnseenSetup generate_unseen_setup(const AnnotationSet& ann, const Splits& splits, std::uint64_t seed,
                                  std::size_t num_train = 100, std::size_t num_test = 500,
                                  Thresholds thresholds = {},
                                  std::size_t max_attempts = kDefaultMaxAttempts);

struct FeasibilitySets {
    std::vector<ConceptTuple> feasible_seen;
    std::vector<ConceptTuple> feasible_unseen;
    std::vector<ConceptTuple> infeasible;
};

// feasible_seen is the Algorithm-A base; unseen pairs co-occur somewhere in the
// dataset but are not in the base; infeasible pairs never co-occur.
FeasibilitySets generate_feasibility_sets(const AnnotationSet& ann, const Splits& splits, std::uint64_t seed,
                                          std::size_t num_seen = 1000, std::size_t num_unseen = 250,
                                          std::size_t num_infeasible = 250, Thresholds thresholds = {},
                                          std::size_t max_attempts = kDefaultMaxAttempts);

// Number of images (anywhere in ann) containing every concept of the tuple.
std::size_t cooccurrence(const AnnotationSet& ann, std::span<const std::uint32_t> tuple);

struct Query {
    QuerySet set;
    ConceptTuple truth;
};

// Uniform composition choice, uniform modality per item.
std::vector<Query> generate_queries(std::span<const ConceptTuple> compositions, std::size_t k,
                                    std::size_t num_queries, std::uint64_t seed);

struct CompositionBenchmark {
    std::size_t k = 2;
    std::uint64_t seed = 0;
    Splits splits;
    std::vector<ConceptTuple> compositions;
    std::optional<UnseenSetup> unseen;
    std::optional<FeasibilitySets> feasibility;
    Thresholds thresholds;
    std::size_t max_attempts = kDefaultMaxAttempts;
};

std::string benchmark_to_json(const CompositionBenchmark& b);
CompositionBenchmark benchmark_from_json(const std::string& text);
void write_benchmark(const CompositionBenchmark& b, const std::string& path);
CompositionBenchmark read_benchmark(const std::string& path);

}  // namespace mpc
