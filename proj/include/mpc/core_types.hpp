#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "mpc/linalg.hpp"

namespace mpc {

// log-variance is clamped to this range inside density and sampling kernels.
// Stored values are never modified.
inline constexpr double kLogVarMin = -60.0;
inline constexpr double kLogVarMax = 60.0;

double clamp_log_var(double lv);
// exp(clamp_log_var(lv)).
double variance_of(double lv);
// d variance_of / d lv; zero where the clamp is active.
double variance_grad(double lv);

// Diagonal Gaussian embedding: mean plus per-dimension log-variance.
struct ProbEmbedding {
    Vec mean;
    Vec log_var;

    std::size_t dim() const { return mean.size(); }
    bool operator==(const ProbEmbedding&) const = default;
};

// Result of composing one or more Gaussians. log_z is the log of the
// accumulated normalization constant of the product.
struct CompositeGaussian {
    Vec mean;
    Vec var;
    double log_z = 0.0;

    std::size_t dim() const { return mean.size(); }
};

CompositeGaussian to_composite(const ProbEmbedding& e);

enum class Modality : std::uint8_t { Image = 0, Text = 1 };

std::string_view to_string(Modality m);

struct QueryItem {
    std::uint32_t concept_id = 0;
    Modality modality = Modality::Image;

    bool operator==(const QueryItem&) const = default;
};

struct QuerySet {
    std::vector<QueryItem> items;

    std::size_t size() const { return items.size(); }
};

// Throws EmptyQuery / InvalidArgument when the query set breaks its invariants.
void validate(const QuerySet& q);

struct SimConfig {
    std::uint32_t j_samples = 7;
    std::uint64_t seed = 0;
};

// Throws DimensionMismatch or NonFinite.
void validate(const ProbEmbedding& e);
void validate(const CompositeGaussian& c);

// Sum over dimensions of log N(z_d; mean_d, var_d).
double gaussian_log_pdf(std::span<const double> z, std::span<const double> mean,
                        std::span<const double> var);

// Standard-normal noise vector for one draw. eps[d] depends only on
// (cfg.seed, stream, draw_index, d).
Vec sample_noise(std::size_t dim, const SimConfig& cfg, std::uint64_t stream,
                 std::uint64_t draw_index);

// Reparameterized draw z = mean + exp(log_var / 2) * eps.
Vec sample(const ProbEmbedding& e, const SimConfig& cfg, std::uint64_t stream,
           std::uint64_t draw_index);

// Draw from N(mean, diag(var)).
Vec sample(const CompositeGaussian& c, const SimConfig& cfg, std::uint64_t stream,
           std::uint64_t draw_index);

}  // namespace mpc
