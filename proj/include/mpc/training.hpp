#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mpc/benchgen.hpp"
#include "mpc/composer.hpp"
#include "mpc/data_source.hpp"
#include "mpc/model.hpp"
#include "mpc/similarity.hpp"

namespace mpc {

struct TrainConfig {
    std::size_t batch_size = 32;
    double lambda_l2 = 0.001;
    double learning_rate = 2e-4;
    std::size_t steps = 2000;
    std::uint64_t seed = 0;
    SimConfig sim;
    ComposerKind composer = ComposerKind::Product;
    SimilarityKind similarity = SimilarityKind::Mpc;
    std::size_t hidden_dim = 16;
    std::size_t embed_dim = 32;
    // Test hook: drop the contrastive term and train on the regularizer alone.
    bool contrastive = true;
};

void validate(const TrainConfig& cfg);
std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& text);

// One (query set, target) pair. `stream` keys every random draw made for
// this row, so permuting rows together with their streams permutes the loss terms.
struct TrainingRow {
    std::vector<TokenSet> inputs;
    TokenSet target;
    std::uint64_t stream = 0;
};

using Batch = std::vector<TrainingRow>;

// Contrastive loss over a B x B score matrix (row i: query i against all
// targets, positives on the diagonal), using a max-shifted log-sum-exp.
double contrastive_loss(const Matrix& scores);

// d contrastive_loss / d scores.
Matrix contrastive_loss_grad(const Matrix& scores);

// Score matrix for composed queries against targets. streams[j] keys the draws
// for row/target j.
Matrix similarity_matrix(std::span<const CompositeGaussian> queries, std::span<const ProbEmbedding> targets,
                         std::span<const std::uint64_t> streams, SimilarityKind kind, const SimConfig& cfg);

double contrastive_loss(std::span<const CompositeGaussian> queries, std::span<const ProbEmbedding> targets,
                        std::span<const std::uint64_t> streams, SimilarityKind kind, const SimConfig& cfg);

// Mean squared log-variance over rows, inputs per row and dimensions.
double logvar_regularizer(std::span<const std::vector<ProbEmbedding>> inputs);

double total_loss(double contrastive, double regularizer, double lambda_l2);

struct LossBreakdown {
    double contrastive = 0.0;
    double regularizer = 0.0;
    double total = 0.0;
};

// Forward pass of the whole batch; fills grad (same shapes as model) when non-null.
LossBreakdown batch_loss(const ModelParams& model, const Batch& batch, const TrainConfig& cfg,
                         ModelParams* grad = nullptr);

ModelParams gradients(const ModelParams& model, const Batch& batch, const TrainConfig& cfg);

struct AdamState {
    std::vector<Vec> m;
    std::vector<Vec> v;
    std::uint64_t step = 0;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

AdamState init_adam(const ModelParams& model);
void optimizer_step(ModelParams& model, const ModelParams& grad, AdamState& state, double lr);

// Training pairs drawn from a benchmark's compositions over training images.
class BatchSampler {
public:
    BatchSampler(const TokenProvider& tokens, std::span<const std::uint64_t> train_images,
                 std::vector<ConceptTuple> compositions);

    Batch sample(std::size_t batch_size, std::size_t step, std::uint64_t seed) const;
    const std::vector<ConceptTuple>& compositions() const { return compositions_; }
    std::size_t feature_dim() const { return tokens_->feature_dim(); }

private:
    const TokenProvider* tokens_;
    ConceptIndex index_;
    std::vector<ConceptTuple> compositions_;
    std::vector<std::vector<std::uint64_t>> targets_;  // per composition
};

struct TrainResult {
    ModelParams model;
    AdamState adam;
    std::vector<double> losses;  // steps + 1 entries; entry s is the loss on batch s
};

using StepCallback = std::function<void(std::size_t step, const LossBreakdown&)>;

TrainResult train_loop(const BatchSampler& sampler, const TrainConfig& cfg, const StepCallback& on_step = {});

// Continues from an existing model and optimizer state.
TrainResult train_loop(const BatchSampler& sampler, const TrainConfig& cfg, ModelParams model, AdamState adam,
                       const StepCallback& on_step = {});

}  // namespace mpc
