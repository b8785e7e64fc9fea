#pragma once

#include <cstdint>
#include <string_view>

#include "mpc/core_types.hpp"
#include "mpc/linalg.hpp"

namespace mpc {

enum class SimilarityKind { Mpc, McPairwise };

std::string_view to_string(SimilarityKind k);
SimilarityKind parse_similarity(std::string_view s);

// J x D standard-normal noise; row j is sample_noise(D, cfg, stream, j).
Matrix noise_matrix(std::size_t dim, const SimConfig& cfg, std::uint64_t stream);

// Rows mean + exp(log_var / 2) * eps_j.
Matrix reparameterize(const ProbEmbedding& e, const Matrix& eps);
// Rows mean + sqrt(var) * eps_j.
Matrix reparameterize(const CompositeGaussian& c, const Matrix& eps);

// Average log-density of target samples under the scaled composite:
// (1/J) sum_j log N(z_j; mean_c, var_c) + log_z. Target samples are drawn
// with sample(t, cfg, stream, j), j < J.
double sim_mpc(const CompositeGaussian& c, const ProbEmbedding& t, const SimConfig& cfg, std::uint64_t stream);

// Same score from already drawn target samples (J x D).
double mpc_score(const CompositeGaussian& c, const Matrix& target_samples);

// Mean cosine over all J^2 sample pairs. Composite samples use stream_a,
// target samples use stream_b.
double sim_mc_pairwise(const CompositeGaussian& a, const ProbEmbedding& b, const SimConfig& cfg,
                       std::uint64_t stream_a, std::uint64_t stream_b);
double sim_mc_pairwise(const CompositeGaussian& a, const ProbEmbedding& b, const SimConfig& cfg,
                       std::uint64_t stream);

double pairwise_score(const Matrix& samples_a, const Matrix& samples_b);

// Exact expectation of sim_mpc over the target's sampling distribution.
double closed_form_expected_sim(const CompositeGaussian& c, const ProbEmbedding& t);

// ---- gradients --------------------------------------------------------------

struct CompositeGrad {
    Vec d_mean;
    Vec d_var;
    double d_log_z = 0.0;

    explicit CompositeGrad(std::size_t dim = 0) : d_mean(dim, 0.0), d_var(dim, 0.0) {}
};

// Accumulates upstream * d mpc_score into dc (composite) and d_samples.
void mpc_score_backward(const CompositeGaussian& c, const Matrix& target_samples, double upstream,
                        CompositeGrad& dc, Matrix& d_samples);

// Accumulates upstream * d pairwise_score into d_a and d_b.
void pairwise_score_backward(const Matrix& samples_a, const Matrix& samples_b, double upstream,
                             Matrix& d_a, Matrix& d_b);

// Chain sample gradients back to embedding parameters (reparameterization).
void reparameterize_backward(const ProbEmbedding& e, const Matrix& eps, const Matrix& d_samples,
                             Vec& d_mean, Vec& d_log_var);
void reparameterize_backward(const CompositeGaussian& c, const Matrix& eps, const Matrix& d_samples,
                             CompositeGrad& dc);

}  // namespace mpc
