#include "mpc/core_types.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mpc/error.hpp"
#include "mpc/rng.hpp"

namespace mpc {

double clamp_log_var(double lv) { return std::clamp(lv, kLogVarMin, kLogVarMax); }

double variance_of(double lv) { return std::exp(clamp_log_var(lv)); }

double variance_grad(double lv) {
    if (lv < kLogVarMin || lv > kLogVarMax) return 0.0;
    return std::exp(lv);
}

CompositeGaussian to_composite(const ProbEmbedding& e) {
    CompositeGaussian c;
    c.mean = e.mean;
    c.var.resize(e.dim());
    for (std::size_t d = 0; d < e.dim(); ++d) c.var[d] = variance_of(e.log_var[d]);
    c.log_z = 0.0;
    return c;
}

std::string_view to_string(Modality m) { return m == Modality::Image ? "image" : "text"; }

void validate(const QuerySet& q) {
    if (q.items.empty()) throw Error(ErrorCode::EmptyQuery, "query set has no items");
    std::set<std::uint32_t> seen;
    for (const auto& it : q.items) {
        if (!seen.insert(it.concept_id).second)
            throw Error(ErrorCode::InvalidArgument, "duplicate concept in query set");
    }
}

void validate(const ProbEmbedding& e) {
    if (e.mean.size() != e.log_var.size())
        throw Error(ErrorCode::DimensionMismatch, "mean and log_var lengths differ");
    if (e.mean.empty()) throw Error(ErrorCode::DimensionMismatch, "embedding has dimension 0");
    if (!all_finite(e.mean) || !all_finite(e.log_var))
        throw Error(ErrorCode::NonFinite, "embedding contains NaN or Inf");
}

void validate(const CompositeGaussian& c) {
    if (c.mean.size() != c.var.size() || c.mean.empty())
        throw Error(ErrorCode::DimensionMismatch, "composite mean and var lengths differ");
    if (!all_finite(c.mean) || !all_finite(c.var) || !std::isfinite(c.log_z))
        throw Error(ErrorCode::NonFinite, "composite contains NaN or Inf");
    for (double v : c.var)
        if (!(v > 0.0)) throw Error(ErrorCode::NonPositiveVariance, "composite variance must be positive");
}

double gaussian_log_pdf(std::span<const double> z, std::span<const double> mean,
                        std::span<const double> var) {
    if (z.size() != mean.size() || z.size() != var.size())
        throw Error(ErrorCode::DimensionMismatch, "gaussian_log_pdf operand lengths differ");
    constexpr double kLog2Pi = 1.8378770664093454836;
    double s = 0.0;
    for (std::size_t d = 0; d < z.size(); ++d) {
        if (!(var[d] > 0.0)) throw Error(ErrorCode::NonPositiveVariance, "variance must be positive");
        const double r = z[d] - mean[d];
        s += -0.5 * (kLog2Pi + std::log(var[d])) - r * r / (2.0 * var[d]);
    }
    return s;
}

Vec sample_noise(std::size_t dim, const SimConfig& cfg, std::uint64_t stream,
                 std::uint64_t draw_index) {
    Vec eps(dim);
    const std::uint64_t draw_stream = stream_key({stream, draw_index});
    for (std::size_t d = 0; d < dim; ++d) eps[d] = counter_normal(cfg.seed, draw_stream, d);
    return eps;
}

Vec sample(const ProbEmbedding& e, const SimConfig& cfg, std::uint64_t stream,
           std::uint64_t draw_index) {
    validate(e);
    Vec z = sample_noise(e.dim(), cfg, stream, draw_index);
    for (std::size_t d = 0; d < e.dim(); ++d)
        z[d] = e.mean[d] + std::exp(0.5 * clamp_log_var(e.log_var[d])) * z[d];
    return z;
}

Vec sample(const CompositeGaussian& c, const SimConfig& cfg, std::uint64_t stream,
           std::uint64_t draw_index) {
    validate(c);
    Vec z = sample_noise(c.dim(), cfg, stream, draw_index);
    for (std::size_t d = 0; d < c.dim(); ++d) z[d] = c.mean[d] + std::sqrt(c.var[d]) * z[d];
    return z;
}

}  // namespace mpc
