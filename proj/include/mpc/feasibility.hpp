#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mpc/composer.hpp"
#include "mpc/core_types.hpp"
#include "mpc/retrieval.hpp"

namespace mpc {

enum class UncertaintyMethod { NegLogZ, McSelfSim, EuclideanMeans };

std::string_view to_string(UncertaintyMethod m);
UncertaintyMethod parse_uncertainty(std::string_view s);  // throws InvalidArgument

// Higher means less overlap / more likely infeasible.
//   NegLogZ:   -c.log_z
//   McSelfSim: 1 - mean cosine over the J(J-1)/2 pairs of J samples of c
// EuclideanMeans needs the inputs; use euclidean_means_score.
double uncertainty_score(const CompositeGaussian& c, UncertaintyMethod method, const SimConfig& cfg,
                         std::uint64_t stream = 0);

// Largest pairwise distance between input means.
double euclidean_means_score(std::span<const ProbEmbedding> items);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;
};

struct RocResult {
    double auc = 0.0;
    std::vector<RocPoint> points;  // starts at (0,0,+inf), one point per distinct threshold
};

// labels: 1 = infeasible (positive), 0 = feasible. Ties count one half.
// Throws SingleClass when either class is empty.
RocResult roc_auc(std::span<const double> scores, std::span<const int> labels);

std::string roc_to_csv(const RocResult& r);

// One query set per tuple. Mixed assigns each item's modality by a seeded coin.
std::vector<QuerySet> feasibility_query_sets(std::span<const ConceptTuple> tuples, ModalityMix mix, std::uint64_t seed);

struct FeasibilityReport {
    RocResult roc;
    std::vector<double> scores;
    std::vector<int> labels;
};

// Scores every query set (feasible queries first, then infeasible). Labels
// are 0 for `feasible` and 1 for `infeasible`.
FeasibilityReport feasibility_eval(const QueryEncoder& encoder, std::span<const QuerySet> feasible,
                                   std::span<const QuerySet> infeasible, ComposerKind composer,
                                   const FusionParams* fusion, UncertaintyMethod method, const SimConfig& cfg);

}  // namespace mpc
