#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpc/composer.hpp"
#include "mpc/similarity.hpp"
#include "mpc/training.hpp"

namespace mpc {

struct GradCheckInstance {
    std::size_t embed_dim = 4;
    std::size_t feature_dim = 5;
    std::size_t hidden_dim = 3;
    std::size_t tokens = 3;
    std::size_t batch = 3;
    std::size_t j_samples = 3;
    std::size_t arity = 2;
};

struct GroupError {
    std::string group;
    double max_rel_error = 0.0;
};

struct GradCheckReport {
    ComposerKind composer = ComposerKind::Product;
    SimilarityKind similarity = SimilarityKind::Mpc;
    std::size_t arity = 2;
    std::vector<GroupError> groups;
    double worst() const;
};

// Random model (all parameters perturbed away from init) and random batch
// with mixed query modalities.
ModelParams random_model(const GradCheckInstance& inst, bool with_fusion, std::uint64_t seed);
Batch random_batch(const GradCheckInstance& inst, std::uint64_t seed);

// Analytic gradient of batch_loss against central differences, per tensor.
// Error for a tensor is max|analytic - numeric| / max(max|numeric|, 1e-6).
GradCheckReport check_gradients(const ModelParams& model, const Batch& batch, const TrainConfig& cfg,
                                double step = 1e-5);

// Every composer x similarity configuration (product also at arity 3).
std::vector<GradCheckReport> check_all_gradients(std::uint64_t seed, const GradCheckInstance& inst = {});

}  // namespace mpc
