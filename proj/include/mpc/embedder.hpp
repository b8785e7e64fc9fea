#pragma once

#include <cstdint>
#include <span>

#include "mpc/core_types.hpp"
#include "mpc/linalg.hpp"

namespace mpc {

inline constexpr double kLayerNormEps = 1e-5;

// A small set of feature tokens (T x F) standing in for a backbone feature map.
struct TokenSet {
    Matrix tokens;
    Modality modality = Modality::Image;

    std::size_t num_tokens() const { return tokens.rows; }
    std::size_t feature_dim() const { return tokens.cols; }
};

void validate(const TokenSet& ts);

// Parameters of one modality head. Weight matrices are stored (in x out).
struct EmbedderParams {
    Matrix proj_w;  // F x D
    Vec proj_b;     // D
    Matrix attn_w1; // F x H
    Vec attn_w2;    // H
    Matrix fc_w;    // F x D
    Vec fc_b;       // D

    std::size_t feature_dim() const { return proj_w.rows; }
    std::size_t hidden_dim() const { return attn_w1.cols; }
    std::size_t embed_dim() const { return proj_w.cols; }

    bool operator==(const EmbedderParams&) const = default;
};

struct EmbedderDims {
    std::size_t feature = 0;
    std::size_t hidden = 0;
    std::size_t embed = 0;
};

// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
EmbedderParams init_params(EmbedderDims dims, std::uint64_t seed);

// Same shapes, all zeros. Used as a gradient accumulator.
EmbedderParams zeros_like(const EmbedderParams& p);

void validate(const EmbedderParams& p);

// LayerNorm without affine parameters.
Vec layer_norm(std::span<const double> x);
// Gradient of layer_norm at x given upstream dy.
Vec layer_norm_backward(std::span<const double> x, std::span<const double> dy);

// Softmax attention weights over tokens: softmax_t(w2 . tanh(x_t W1)).
Vec attention_weights(const Matrix& tokens, const EmbedderParams& p);
// Convex combination of token rows under attention_weights.
Vec attention_pool(const Matrix& tokens, const EmbedderParams& p);

// Intermediate values kept for the backward pass.
struct EmbedCache {
    Vec pooled;       // mean over tokens, F
    Matrix hidden;    // tanh activations, T x H
    Vec attn;         // T
    Vec attended;     // F
    Vec z;            // projection of pooled, D
    Vec g;            // fc(attended), D
    Vec pre_norm;     // z + sigmoid(g), D
    ProbEmbedding out;
};

EmbedCache embed_head_forward(const TokenSet& ts, const EmbedderParams& p);

ProbEmbedding embed_head(const TokenSet& ts, const EmbedderParams& p);

// Accumulates d(loss)/d(params) into grad given d(loss)/d(mean), d(loss)/d(log_var).
void embed_head_backward(const TokenSet& ts, const EmbedderParams& p, const EmbedCache& cache,
                         std::span<const double> d_mean, std::span<const double> d_log_var,
                         EmbedderParams& grad);

}  // namespace mpc
