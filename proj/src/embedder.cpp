#include "mpc/embedder.hpp"

#include <algorithm>
#include <cmath>

#include "mpc/error.hpp"
#include "mpc/rng.hpp"

namespace mpc {

namespace {

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void fill_uniform(Matrix& m, double bound, Rng& rng) {
    for (double& w : m.data) w = rng.uniform(-bound, bound);
}

void check_shapes(const TokenSet& ts, const EmbedderParams& p) {
    if (ts.feature_dim() != p.feature_dim())
        throw Error(ErrorCode::ShapeMismatch, "token feature dim " + std::to_string(ts.feature_dim()) +
                                                  " != head feature dim " + std::to_string(p.feature_dim()));
}

}  // namespace

void validate(const TokenSet& ts) {
    if (ts.tokens.rows == 0 || ts.tokens.cols == 0)
        throw Error(ErrorCode::ShapeMismatch, "token set must have T >= 1 and F >= 1");
    if (ts.tokens.data.size() != ts.tokens.rows * ts.tokens.cols)
        throw Error(ErrorCode::ShapeMismatch, "token storage does not match T x F");
    if (!all_finite(ts.tokens.data)) throw Error(ErrorCode::NonFinite, "token set contains NaN or Inf");
}

EmbedderParams init_params(EmbedderDims dims, std::uint64_t seed) {
    if (dims.feature == 0 || dims.hidden == 0 || dims.embed == 0)
        throw Error(ErrorCode::InvalidArgument, "embedder dims must be positive");
    Rng rng(seed);
    const double in_bound = 1.0 / std::sqrt(static_cast<double>(dims.feature));
    const double hid_bound = 1.0 / std::sqrt(static_cast<double>(dims.hidden));

    EmbedderParams p;
    p.proj_w = Matrix(dims.feature, dims.embed);
    p.proj_b.assign(dims.embed, 0.0);
    p.attn_w1 = Matrix(dims.feature, dims.hidden);
    p.attn_w2.assign(dims.hidden, 0.0);
    p.fc_w = Matrix(dims.feature, dims.embed);
    p.fc_b.assign(dims.embed, 0.0);

    fill_uniform(p.proj_w, in_bound, rng);
    fill_uniform(p.attn_w1, in_bound, rng);
    for (double& w : p.attn_w2) w = rng.uniform(-hid_bound, hid_bound);
    fill_uniform(p.fc_w, in_bound, rng);
    return p;
}

EmbedderParams zeros_like(const EmbedderParams& p) {
    EmbedderParams z;
    z.proj_w = Matrix(p.proj_w.rows, p.proj_w.cols);
    z.proj_b.assign(p.proj_b.size(), 0.0);
    z.attn_w1 = Matrix(p.attn_w1.rows, p.attn_w1.cols);
    z.attn_w2.assign(p.attn_w2.size(), 0.0);
    z.fc_w = Matrix(p.fc_w.rows, p.fc_w.cols);
    z.fc_b.assign(p.fc_b.size(), 0.0);
    return z;
}

void validate(const EmbedderParams& p) {
    const std::size_t F = p.proj_w.rows, D = p.proj_w.cols, H = p.attn_w1.cols;
    const bool ok = F > 0 && D > 0 && H > 0 && p.proj_b.size() == D && p.attn_w1.rows == F &&
                    p.attn_w2.size() == H && p.fc_w.rows == F && p.fc_w.cols == D && p.fc_b.size() == D;
    if (!ok) throw Error(ErrorCode::ShapeMismatch, "embedder parameter shapes are inconsistent");
    for (auto span : {std::span<const double>(p.proj_w.data), std::span<const double>(p.proj_b),
                      std::span<const double>(p.attn_w1.data), std::span<const double>(p.attn_w2),
                      std::span<const double>(p.fc_w.data), std::span<const double>(p.fc_b)})
        if (!all_finite(span)) throw Error(ErrorCode::NonFinite, "embedder parameters contain NaN or Inf");
}

Vec layer_norm(std::span<const double> x) {
    const double n = static_cast<double>(x.size());
    double mu = 0.0;
    for (double v : x) mu += v;
    mu /= n;
    double var = 0.0;
    for (double v : x) var += (v - mu) * (v - mu);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    Vec y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] - mu) * inv;
    return y;
}

Vec layer_norm_backward(std::span<const double> x, std::span<const double> dy) {
    const double n = static_cast<double>(x.size());
    double mu = 0.0;
    for (double v : x) mu += v;
    mu /= n;
    double var = 0.0;
    for (double v : x) var += (v - mu) * (v - mu);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);

    double mean_dy = 0.0, mean_dy_y = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double y = (x[i] - mu) * inv;
        mean_dy += dy[i];
        mean_dy_y += dy[i] * y;
    }
    mean_dy /= n;
    mean_dy_y /= n;
    Vec dx(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double y = (x[i] - mu) * inv;
        dx[i] = inv * (dy[i] - mean_dy - y * mean_dy_y);
    }
    return dx;
}

namespace {

// Fills hidden (T x H) and returns the softmax weights.
Vec attention_forward(const Matrix& tokens, const EmbedderParams& p, Matrix& hidden) {
    const std::size_t T = tokens.rows, H = p.hidden_dim();
    hidden = Matrix(T, H);
    Vec logits(T, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        Vec pre = affine(p.attn_w1, Vec(H, 0.0), tokens.row(t));
        for (std::size_t h = 0; h < H; ++h) {
            hidden(t, h) = std::tanh(pre[h]);
            logits[t] += p.attn_w2[h] * hidden(t, h);
        }
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (double& l : logits) {
        l = std::exp(l - mx);
        total += l;
    }
    for (double& l : logits) l /= total;
    return logits;
}

}  // namespace

Vec attention_weights(const Matrix& tokens, const EmbedderParams& p) {
    if (tokens.cols != p.feature_dim()) throw Error(ErrorCode::ShapeMismatch, "token/attention shape mismatch");
    if (tokens.rows == 0) throw Error(ErrorCode::ShapeMismatch, "attention over zero tokens");
    Matrix hidden;
    return attention_forward(tokens, p, hidden);
}

Vec attention_pool(const Matrix& tokens, const EmbedderParams& p) {
    const Vec a = attention_weights(tokens, p);
    Vec out(tokens.cols, 0.0);
    for (std::size_t t = 0; t < tokens.rows; ++t)
        for (std::size_t f = 0; f < tokens.cols; ++f) out[f] += a[t] * tokens(t, f);
    return out;
}

EmbedCache embed_head_forward(const TokenSet& ts, const EmbedderParams& p) {
    validate(ts);
    check_shapes(ts, p);
    const Matrix& X = ts.tokens;
    const std::size_t T = X.rows, F = X.cols, D = p.embed_dim();

    EmbedCache c;
    c.pooled.assign(F, 0.0);
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t f = 0; f < F; ++f) c.pooled[f] += X(t, f);
    for (double& v : c.pooled) v /= static_cast<double>(T);

    c.attn = attention_forward(X, p, c.hidden);
    c.attended.assign(F, 0.0);
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t f = 0; f < F; ++f) c.attended[f] += c.attn[t] * X(t, f);

    c.z = affine(p.proj_w, p.proj_b, c.pooled);
    c.g = affine(p.fc_w, p.fc_b, c.attended);
    c.pre_norm.resize(D);
    c.out.log_var.resize(D);
    for (std::size_t d = 0; d < D; ++d) {
        c.pre_norm[d] = c.z[d] + sigmoid(c.g[d]);
        c.out.log_var[d] = c.z[d] + c.g[d];
    }
    c.out.mean = layer_norm(c.pre_norm);
    return c;
}

ProbEmbedding embed_head(const TokenSet& ts, const EmbedderParams& p) {
    return embed_head_forward(ts, p).out;
}

void embed_head_backward(const TokenSet& ts, const EmbedderParams& p, const EmbedCache& c,
                         std::span<const double> d_mean, std::span<const double> d_log_var,
                         EmbedderParams& grad) {
    const Matrix& X = ts.tokens;
    const std::size_t T = X.rows, F = X.cols, H = p.hidden_dim(), D = p.embed_dim();

    const Vec d_pre = layer_norm_backward(c.pre_norm, d_mean);
    Vec dz(D), dg(D);
    for (std::size_t d = 0; d < D; ++d) {
        const double s = sigmoid(c.g[d]);
        dz[d] = d_pre[d] + d_log_var[d];
        dg[d] = d_pre[d] * s * (1.0 - s) + d_log_var[d];
    }

    for (std::size_t f = 0; f < F; ++f) {
        for (std::size_t d = 0; d < D; ++d) {
            grad.proj_w(f, d) += c.pooled[f] * dz[d];
            grad.fc_w(f, d) += c.attended[f] * dg[d];
        }
    }
    for (std::size_t d = 0; d < D; ++d) {
        grad.proj_b[d] += dz[d];
        grad.fc_b[d] += dg[d];
    }

    // attended = sum_t a_t x_t
    Vec d_attended(F, 0.0);
    for (std::size_t f = 0; f < F; ++f) d_attended[f] = dot(p.fc_w.row(f), dg);
    Vec da(T);
    double weighted = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        da[t] = dot(X.row(t), d_attended);
        weighted += c.attn[t] * da[t];
    }
    for (std::size_t t = 0; t < T; ++t) {
        const double d_logit = c.attn[t] * (da[t] - weighted);
        if (d_logit == 0.0) continue;
        for (std::size_t h = 0; h < H; ++h) {
            const double hv = c.hidden(t, h);
            grad.attn_w2[h] += d_logit * hv;
            const double d_pre_h = d_logit * p.attn_w2[h] * (1.0 - hv * hv);
            for (std::size_t f = 0; f < F; ++f) grad.attn_w1(f, h) += X(t, f) * d_pre_h;
        }
    }
}

}  // namespace mpc
