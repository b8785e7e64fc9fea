#include "mpc/feasibility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "mpc/error.hpp"
#include "mpc/rng.hpp"
#include "mpc/similarity.hpp"

namespace mpc {

std::string_view to_string(UncertaintyMethod m) {
    switch (m) {
        case UncertaintyMethod::NegLogZ: return "neg_log_z";
        case UncertaintyMethod::McSelfSim: return "mc_self_sim";
        case UncertaintyMethod::EuclideanMeans: return "euclidean_means";
    }
    return "?";
}

UncertaintyMethod parse_uncertainty(std::string_view s) {
    if (s == "neg_log_z") return UncertaintyMethod::NegLogZ;
    if (s == "mc_self_sim") return UncertaintyMethod::McSelfSim;
    if (s == "euclidean_means") return UncertaintyMethod::EuclideanMeans;
    throw Error(ErrorCode::InvalidArgument, "unknown uncertainty method '" + std::string(s) + "'");
}

double uncertainty_score(const CompositeGaussian& c, UncertaintyMethod method, const SimConfig& cfg,
                         std::uint64_t stream) {
    validate(c);
    switch (method) {
        case UncertaintyMethod::NegLogZ: return -c.log_z;
        case UncertaintyMethod::McSelfSim: {
            const std::size_t J = cfg.j_samples;
            if (J < 2) return 0.0;
            const Matrix samples = reparameterize(c, noise_matrix(c.dim(), cfg, stream));
            double total = 0.0;
            for (std::size_t i = 0; i < J; ++i)
                for (std::size_t j = i + 1; j < J; ++j) total += cosine(samples.row(i), samples.row(j));
            return 1.0 - total / static_cast<double>(J * (J - 1) / 2);
        }
        case UncertaintyMethod::EuclideanMeans:
            throw Error(ErrorCode::InvalidArgument, "euclidean_means scores the inputs, not the composite");
    }
    return 0.0;
}

double euclidean_means_score(std::span<const ProbEmbedding> items) {
    if (items.empty()) throw Error(ErrorCode::EmptyQuery, "no inputs to score");
    double best = 0.0;
    for (std::size_t a = 0; a < items.size(); ++a) {
        for (std::size_t b = a + 1; b < items.size(); ++b) {
            if (items[a].dim() != items[b].dim()) throw Error(ErrorCode::DimensionMismatch, "input dimensions differ");
            double s = 0.0;
            for (std::size_t d = 0; d < items[a].dim(); ++d) {
                const double t = items[a].mean[d] - items[b].mean[d];
                s += t * t;
            }
            best = std::max(best, std::sqrt(s));
        }
    }
    return best;
}

RocResult roc_auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw Error(ErrorCode::InvalidArgument, "scores and labels differ in length");
    std::size_t pos = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) throw Error(ErrorCode::InvalidArgument, "labels must be 0 or 1");
        if (!std::isfinite(scores[i])) throw Error(ErrorCode::NonFinite, "score " + std::to_string(i) + " is not finite");
        pos += static_cast<std::size_t>(labels[i]);
    }
    const std::size_t neg = scores.size() - pos;
    if (pos == 0 || neg == 0) throw Error(ErrorCode::SingleClass, "both feasible and infeasible examples are required");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocResult r;
    r.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    // Walk groups of tied scores from the top. Each negative in a group beats
    // the positives already passed and ties with the positives in the group.
    double twice_u = 0.0;
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i, gp = 0, gn = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (labels[order[j]] == 1 ? gp : gn) += 1;
            ++j;
        }
        twice_u += static_cast<double>(gn) * (2.0 * static_cast<double>(tp) + static_cast<double>(gp));
        tp += gp;
        fp += gn;
        r.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                            static_cast<double>(tp) / static_cast<double>(pos), scores[order[i]]});
        i = j;
    }
    r.auc = twice_u / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
    return r;
}

std::string roc_to_csv(const RocResult& r) {
    std::ostringstream os;
    os.precision(17);
    os << "fpr,tpr,threshold\n";
    for (const auto& p : r.points) {
        os << p.fpr << ',' << p.tpr << ',';
        if (std::isinf(p.threshold)) os << "inf";
        else os << p.threshold;
        os << '\n';
    }
    os << "# auc=" << r.auc << '\n';
    return os.str();
}

std::vector<QuerySet> feasibility_query_sets(std::span<const ConceptTuple> tuples, ModalityMix mix, std::uint64_t seed) {
    Rng rng(stream_key({seed, 0xfea5}));
    std::vector<QuerySet> out;
    for (const auto& t : tuples) {
        QuerySet qs;
        for (std::uint32_t c : t) {
            Modality m = Modality::Image;
            if (mix == ModalityMix::Text || (mix == ModalityMix::Mixed && rng.coin())) m = Modality::Text;
            qs.items.push_back({c, m});
        }
        out.push_back(std::move(qs));
    }
    return out;
}

FeasibilityReport feasibility_eval(const QueryEncoder& encoder, std::span<const QuerySet> feasible,
                                   std::span<const QuerySet> infeasible, ComposerKind composer,
                                   const FusionParams* fusion, UncertaintyMethod method, const SimConfig& cfg) {
    FeasibilityReport rep;
    auto score_one = [&](const QuerySet& qs, std::size_t index) {
        validate(qs);
        std::vector<ProbEmbedding> items;
        for (std::size_t pos = 0; pos < qs.items.size(); ++pos) items.push_back(encoder.encode(qs.items[pos], index, pos));
        if (method == UncertaintyMethod::EuclideanMeans) return euclidean_means_score(items);
        return uncertainty_score(compose(composer, items, fusion), method, cfg, stream_key({cfg.seed, 0xfea5, index}));
    };
    std::size_t index = 0;
    for (const auto& qs : feasible) {
        rep.scores.push_back(score_one(qs, index++));
        rep.labels.push_back(0);
    }
    for (const auto& qs : infeasible) {
        rep.scores.push_back(score_one(qs, index++));
        rep.labels.push_back(1);
    }
    rep.roc = roc_auc(rep.scores, rep.labels);
    return rep;
}

}  // namespace mpc
