#include "mpc/similarity.hpp"

#include <cmath>
#include <string>

#include "mpc/error.hpp"
#include "mpc/rng.hpp"

namespace mpc {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void require_dims(std::size_t a, std::size_t b) {
    if (a != b)
        throw Error(ErrorCode::DimensionMismatch,
                    "similarity operands have dimensions " + std::to_string(a) + " and " + std::to_string(b));
}

void require_samples(const SimConfig& cfg) {
    if (cfg.j_samples == 0) throw Error(ErrorCode::InvalidArgument, "j_samples must be >= 1");
}

}  // namespace

std::string_view to_string(SimilarityKind k) { return k == SimilarityKind::Mpc ? "mpc" : "mc_pairwise"; }

SimilarityKind parse_similarity(std::string_view s) {
    if (s == "mpc") return SimilarityKind::Mpc;
    if (s == "mc_pairwise") return SimilarityKind::McPairwise;
    throw Error(ErrorCode::InvalidArgument, "unknown similarity '" + std::string(s) + "'");
}

Matrix noise_matrix(std::size_t dim, const SimConfig& cfg, std::uint64_t stream) {
    Matrix eps(cfg.j_samples, dim);
    for (std::size_t j = 0; j < cfg.j_samples; ++j) {
        const Vec row = sample_noise(dim, cfg, stream, j);
        std::copy(row.begin(), row.end(), eps.row(j).begin());
    }
    return eps;
}

Matrix reparameterize(const ProbEmbedding& e, const Matrix& eps) {
    require_dims(e.dim(), eps.cols);
    Matrix z(eps.rows, eps.cols);
    Vec sd(e.dim());
    for (std::size_t d = 0; d < e.dim(); ++d) sd[d] = std::exp(0.5 * clamp_log_var(e.log_var[d]));
    for (std::size_t j = 0; j < eps.rows; ++j)
        for (std::size_t d = 0; d < eps.cols; ++d) z(j, d) = e.mean[d] + sd[d] * eps(j, d);
    return z;
}

Matrix reparameterize(const CompositeGaussian& c, const Matrix& eps) {
    require_dims(c.dim(), eps.cols);
    Matrix z(eps.rows, eps.cols);
    Vec sd(c.dim());
    for (std::size_t d = 0; d < c.dim(); ++d) sd[d] = std::sqrt(c.var[d]);
    for (std::size_t j = 0; j < eps.rows; ++j)
        for (std::size_t d = 0; d < eps.cols; ++d) z(j, d) = c.mean[d] + sd[d] * eps(j, d);
    return z;
}

double mpc_score(const CompositeGaussian& c, const Matrix& samples) {
    require_dims(c.dim(), samples.cols);
    const std::size_t J = samples.rows, D = c.dim();
    double norm_term = 0.0;
    for (std::size_t d = 0; d < D; ++d) norm_term += -0.5 * (kLog2Pi + std::log(c.var[d]));
    double quad = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
        for (std::size_t d = 0; d < D; ++d) {
            const double r = samples(j, d) - c.mean[d];
            quad += r * r / (2.0 * c.var[d]);
        }
    }
    return norm_term - quad / static_cast<double>(J) + c.log_z;
}

double sim_mpc(const CompositeGaussian& c, const ProbEmbedding& t, const SimConfig& cfg, std::uint64_t stream) {
    validate(c);
    validate(t);
    require_dims(c.dim(), t.dim());
    require_samples(cfg);
    return mpc_score(c, reparameterize(t, noise_matrix(t.dim(), cfg, stream)));
}

double pairwise_score(const Matrix& a, const Matrix& b) {
    require_dims(a.cols, b.cols);
    double total = 0.0;
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < b.rows; ++j) total += cosine(a.row(i), b.row(j));
    return total / static_cast<double>(a.rows * b.rows);
}

double sim_mc_pairwise(const CompositeGaussian& a, const ProbEmbedding& b, const SimConfig& cfg,
                       std::uint64_t stream_a, std::uint64_t stream_b) {
    validate(a);
    validate(b);
    require_dims(a.dim(), b.dim());
    require_samples(cfg);
    const Matrix za = reparameterize(a, noise_matrix(a.dim(), cfg, stream_a));
    const Matrix zb = reparameterize(b, noise_matrix(b.dim(), cfg, stream_b));
    return pairwise_score(za, zb);
}

double sim_mc_pairwise(const CompositeGaussian& a, const ProbEmbedding& b, const SimConfig& cfg,
                       std::uint64_t stream) {
    return sim_mc_pairwise(a, b, cfg, stream_key({stream, 1}), stream_key({stream, 2}));
}

double closed_form_expected_sim(const CompositeGaussian& c, const ProbEmbedding& t) {
    validate(c);
    validate(t);
    require_dims(c.dim(), t.dim());
    double s = c.log_z;
    for (std::size_t d = 0; d < c.dim(); ++d) {
        const double r = t.mean[d] - c.mean[d];
        s += -0.5 * (kLog2Pi + std::log(c.var[d])) - (variance_of(t.log_var[d]) + r * r) / (2.0 * c.var[d]);
    }
    return s;
}

void mpc_score_backward(const CompositeGaussian& c, const Matrix& samples, double upstream,
                        CompositeGrad& dc, Matrix& d_samples) {
    const std::size_t J = samples.rows, D = c.dim();
    const double w = upstream / static_cast<double>(J);
    for (std::size_t d = 0; d < D; ++d) {
        const double v = c.var[d];
        double sum_r = 0.0, sum_r2 = 0.0;
        for (std::size_t j = 0; j < J; ++j) {
            const double r = samples(j, d) - c.mean[d];
            sum_r += r;
            sum_r2 += r * r;
            d_samples(j, d) += -w * r / v;
        }
        dc.d_mean[d] += w * sum_r / v;
        dc.d_var[d] += upstream * (-0.5 / v) + w * sum_r2 / (2.0 * v * v);
    }
    dc.d_log_z += upstream;
}

void pairwise_score_backward(const Matrix& a, const Matrix& b, double upstream, Matrix& d_a, Matrix& d_b) {
    const std::size_t D = a.cols;
    const double w = upstream / static_cast<double>(a.rows * b.rows);
    Vec na(a.rows), nb(b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        na[i] = norm(a.row(i));
        if (na[i] == 0.0) throw Error(ErrorCode::ZeroVector, "zero-norm sample");
    }
    for (std::size_t j = 0; j < b.rows; ++j) {
        nb[j] = norm(b.row(j));
        if (nb[j] == 0.0) throw Error(ErrorCode::ZeroVector, "zero-norm sample");
    }
    for (std::size_t i = 0; i < a.rows; ++i) {
        const auto ai = a.row(i);
        for (std::size_t j = 0; j < b.rows; ++j) {
            const auto bj = b.row(j);
            const double inv = 1.0 / (na[i] * nb[j]);
            const double cos = dot(ai, bj) * inv;
            const double ca = cos / (na[i] * na[i]);
            const double cb = cos / (nb[j] * nb[j]);
            for (std::size_t d = 0; d < D; ++d) {
                d_a(i, d) += w * (bj[d] * inv - ca * ai[d]);
                d_b(j, d) += w * (ai[d] * inv - cb * bj[d]);
            }
        }
    }
}

void reparameterize_backward(const ProbEmbedding& e, const Matrix& eps, const Matrix& d_samples,
                             Vec& d_mean, Vec& d_log_var) {
    for (std::size_t d = 0; d < e.dim(); ++d) {
        const double lv = e.log_var[d];
        const bool clamped = lv < kLogVarMin || lv > kLogVarMax;
        const double half_sd = 0.5 * std::exp(0.5 * clamp_log_var(lv));
        for (std::size_t j = 0; j < eps.rows; ++j) {
            d_mean[d] += d_samples(j, d);
            if (!clamped) d_log_var[d] += d_samples(j, d) * half_sd * eps(j, d);
        }
    }
}

void reparameterize_backward(const CompositeGaussian& c, const Matrix& eps, const Matrix& d_samples,
                             CompositeGrad& dc) {
    for (std::size_t d = 0; d < c.dim(); ++d) {
        const double inv_2sd = 0.5 / std::sqrt(c.var[d]);
        for (std::size_t j = 0; j < eps.rows; ++j) {
            dc.d_mean[d] += d_samples(j, d);
            dc.d_var[d] += d_samples(j, d) * eps(j, d) * inv_2sd;
        }
    }
}

}  // namespace mpc
