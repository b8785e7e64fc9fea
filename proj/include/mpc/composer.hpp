#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mpc/core_types.hpp"
#include "mpc/linalg.hpp"

namespace mpc {

enum class ComposerKind { Product, Addition, Mlp };

std::string_view to_string(ComposerKind k);
ComposerKind parse_composer(std::string_view s);

// Product of two Gaussian densities. log_z of the left operand is carried
// forward; the increment is log N(mean_a; mean_b, var_a + var_b).
CompositeGaussian compose_pair(const CompositeGaussian& a, const ProbEmbedding& b);
CompositeGaussian compose_pair(const ProbEmbedding& a, const ProbEmbedding& b);

// Left fold of compose_pair over items taken in `order`.
CompositeGaussian compose_many(std::span<const ProbEmbedding> items,
                               std::span<const std::size_t> order);
CompositeGaussian compose_many(std::span<const ProbEmbedding> items);

// Sum of independent Gaussians: means add, variances add, log_z = 0.
CompositeGaussian compose_addition(std::span<const ProbEmbedding> items);

// Two-layer tanh MLP mapping [mean_a, log_var_a, mean_b, log_var_b] to
// [mean_c, log_var_c]. Hidden width is 2D.
struct FusionParams {
    Matrix w1;  // 4D x 2D
    Vec b1;     // 2D
    Matrix w2;  // 2D x 2D
    Vec b2;     // 2D

    std::size_t embed_dim() const { return w2.cols / 2; }
    bool operator==(const FusionParams&) const = default;
};

FusionParams init_fusion_params(std::size_t embed_dim, std::uint64_t seed);
FusionParams zeros_like(const FusionParams& p);

struct MlpCache {
    Vec input;   // 4D
    Vec hidden;  // 2D, post-tanh
    Vec output;  // 2D: mean then log-variance
};

CompositeGaussian compose_mlp(const ProbEmbedding& a, const ProbEmbedding& b, const FusionParams& p,
                              MlpCache* cache = nullptr);

// Dispatches on kind. Mlp requires exactly two items and fusion params.
CompositeGaussian compose(ComposerKind kind, std::span<const ProbEmbedding> items,
                          const FusionParams* fusion = nullptr);

// Gradients of a composition with respect to each input's mean and log_var.
struct ComposeGrad {
    std::vector<Vec> d_mean;
    std::vector<Vec> d_log_var;
};

ComposeGrad compose_product_backward(std::span<const ProbEmbedding> items, const CompositeGaussian& out,
                                     std::span<const double> d_mean, std::span<const double> d_var,
                                     double d_log_z);

ComposeGrad compose_addition_backward(std::span<const ProbEmbedding> items,
                                      std::span<const double> d_mean, std::span<const double> d_var);

// Also accumulates fusion-parameter gradients into grad.
ComposeGrad compose_mlp_backward(const FusionParams& p, const MlpCache& cache,
                                 std::span<const double> d_mean, std::span<const double> d_var,
                                 FusionParams& grad);

}  // namespace mpc
