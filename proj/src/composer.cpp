#include "mpc/composer.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "mpc/error.hpp"
#include "mpc/rng.hpp"

namespace mpc {

std::string_view to_string(ComposerKind k) {
    switch (k) {
        case ComposerKind::Product: return "product";
        case ComposerKind::Addition: return "addition";
        case ComposerKind::Mlp: return "mlp";
    }
    return "product";
}

ComposerKind parse_composer(std::string_view s) {
    if (s == "product") return ComposerKind::Product;
    if (s == "addition") return ComposerKind::Addition;
    if (s == "mlp") return ComposerKind::Mlp;
    throw Error(ErrorCode::InvalidArgument, "unknown composer '" + std::string(s) + "'");
}

namespace {

void require_same_dim(std::size_t a, std::size_t b) {
    if (a != b)
        throw Error(ErrorCode::DimensionMismatch,
                    "composition operands have dimensions " + std::to_string(a) + " and " + std::to_string(b));
}

void require_items(std::span<const ProbEmbedding> items) {
    if (items.empty()) throw Error(ErrorCode::EmptyQuery, "cannot compose zero embeddings");
    for (const auto& e : items) {
        validate(e);
        require_same_dim(items[0].dim(), e.dim());
    }
}

}  // namespace

CompositeGaussian compose_pair(const CompositeGaussian& a, const ProbEmbedding& b) {
    validate(b);
    require_same_dim(a.dim(), b.dim());
    constexpr double kLog2Pi = 1.8378770664093454836;
    const std::size_t D = a.dim();
    CompositeGaussian c;
    c.mean.resize(D);
    c.var.resize(D);
    double increment = 0.0;
    for (std::size_t d = 0; d < D; ++d) {
        const double va = a.var[d];
        const double vb = variance_of(b.log_var[d]);
        const double vc = 1.0 / (1.0 / va + 1.0 / vb);
        c.var[d] = vc;
        c.mean[d] = vc * (a.mean[d] / va + b.mean[d] / vb);
        const double s = va + vb;
        const double r = a.mean[d] - b.mean[d];
        increment += -0.5 * (kLog2Pi + std::log(s)) - r * r / (2.0 * s);
    }
    c.log_z = a.log_z + increment;
    return c;
}

CompositeGaussian compose_pair(const ProbEmbedding& a, const ProbEmbedding& b) {
    validate(a);
    return compose_pair(to_composite(a), b);
}

CompositeGaussian compose_many(std::span<const ProbEmbedding> items, std::span<const std::size_t> order) {
    require_items(items);
    if (order.size() != items.size()) throw Error(ErrorCode::InvalidArgument, "order must be a permutation of items");
    std::vector<bool> used(items.size(), false);
    for (std::size_t i : order) {
        if (i >= items.size() || used[i]) throw Error(ErrorCode::InvalidArgument, "order must be a permutation of items");
        used[i] = true;
    }
    CompositeGaussian acc = to_composite(items[order[0]]);
    for (std::size_t i = 1; i < order.size(); ++i) acc = compose_pair(acc, items[order[i]]);
    return acc;
}

CompositeGaussian compose_many(std::span<const ProbEmbedding> items) {
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    return compose_many(items, order);
}

CompositeGaussian compose_addition(std::span<const ProbEmbedding> items) {
    require_items(items);
    const std::size_t D = items[0].dim();
    CompositeGaussian c;
    c.mean.assign(D, 0.0);
    c.var.assign(D, 0.0);
    for (const auto& e : items) {
        for (std::size_t d = 0; d < D; ++d) {
            c.mean[d] += e.mean[d];
            c.var[d] += variance_of(e.log_var[d]);
        }
    }
    c.log_z = 0.0;
    return c;
}

FusionParams init_fusion_params(std::size_t embed_dim, std::uint64_t seed) {
    if (embed_dim == 0) throw Error(ErrorCode::InvalidArgument, "fusion embed_dim must be positive");
    const std::size_t D = embed_dim;
    Rng rng(seed);
    FusionParams p;
    p.w1 = Matrix(4 * D, 2 * D);
    p.b1.assign(2 * D, 0.0);
    p.w2 = Matrix(2 * D, 2 * D);
    p.b2.assign(2 * D, 0.0);
    const double b1 = 1.0 / std::sqrt(static_cast<double>(4 * D));
    const double b2 = 1.0 / std::sqrt(static_cast<double>(2 * D));
    for (double& w : p.w1.data) w = rng.uniform(-b1, b1);
    for (double& w : p.w2.data) w = rng.uniform(-b2, b2);
    return p;
}

FusionParams zeros_like(const FusionParams& p) {
    FusionParams z;
    z.w1 = Matrix(p.w1.rows, p.w1.cols);
    z.b1.assign(p.b1.size(), 0.0);
    z.w2 = Matrix(p.w2.rows, p.w2.cols);
    z.b2.assign(p.b2.size(), 0.0);
    return z;
}

CompositeGaussian compose_mlp(const ProbEmbedding& a, const ProbEmbedding& b, const FusionParams& p,
                              MlpCache* cache) {
    validate(a);
    validate(b);
    require_same_dim(a.dim(), b.dim());
    const std::size_t D = a.dim();
    if (p.w1.rows != 4 * D || p.w1.cols != 2 * D || p.w2.rows != 2 * D || p.w2.cols != 2 * D ||
        p.b1.size() != 2 * D || p.b2.size() != 2 * D)
        throw Error(ErrorCode::ShapeMismatch, "fusion parameters do not match embedding dimension");

    MlpCache local;
    MlpCache& c = cache ? *cache : local;
    c.input.clear();
    c.input.reserve(4 * D);
    c.input.insert(c.input.end(), a.mean.begin(), a.mean.end());
    c.input.insert(c.input.end(), a.log_var.begin(), a.log_var.end());
    c.input.insert(c.input.end(), b.mean.begin(), b.mean.end());
    c.input.insert(c.input.end(), b.log_var.begin(), b.log_var.end());
    c.hidden = affine(p.w1, p.b1, c.input);
    for (double& h : c.hidden) h = std::tanh(h);
    c.output = affine(p.w2, p.b2, c.hidden);

    CompositeGaussian out;
    out.mean.assign(c.output.begin(), c.output.begin() + static_cast<std::ptrdiff_t>(D));
    out.var.resize(D);
    for (std::size_t d = 0; d < D; ++d) out.var[d] = variance_of(c.output[D + d]);
    out.log_z = 0.0;
    return out;
}

CompositeGaussian compose(ComposerKind kind, std::span<const ProbEmbedding> items, const FusionParams* fusion) {
    switch (kind) {
        case ComposerKind::Product: return compose_many(items);
        case ComposerKind::Addition: return compose_addition(items);
        case ComposerKind::Mlp:
            if (items.size() != 2)
                throw Error(ErrorCode::UnsupportedArity,
                            "mlp fusion composes exactly 2 inputs, got " + std::to_string(items.size()));
            if (fusion == nullptr) throw Error(ErrorCode::InvalidArgument, "mlp composer requires fusion parameters");
            return compose_mlp(items[0], items[1], *fusion);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown composer");
}

ComposeGrad compose_product_backward(std::span<const ProbEmbedding> items, const CompositeGaussian& out,
                                     std::span<const double> d_mean, std::span<const double> d_var,
                                     double d_log_z) {
    // Differentiates the order-free closed form of the k-way product:
    //   P = sum_i p_i, mean_c = sum_i p_i m_i / P, var_c = 1 / P,
    //   log_z = sum_i log N(mean_c; m_i, 1/p_i) - log N(mean_c; mean_c, 1/P).
    // d log_z / d mean_c vanishes, which keeps the per-input terms local.
    const std::size_t k = items.size(), D = out.dim();
    ComposeGrad g;
    g.d_mean.assign(k, Vec(D, 0.0));
    g.d_log_var.assign(k, Vec(D, 0.0));
    for (std::size_t d = 0; d < D; ++d) {
        const double P = 1.0 / out.var[d];
        const double mc = out.mean[d];
        for (std::size_t i = 0; i < k; ++i) {
            const double lv = items[i].log_var[d];
            const double p = 1.0 / variance_of(lv);
            const double diff = items[i].mean[d] - mc;
            g.d_mean[i][d] = d_mean[d] * p / P - d_log_z * p * diff;
            const double dp = d_mean[d] * diff / P - d_var[d] / (P * P) +
                              d_log_z * 0.5 * (1.0 / p - diff * diff - 1.0 / P);
            const bool clamped = lv < kLogVarMin || lv > kLogVarMax;
            g.d_log_var[i][d] = clamped ? 0.0 : -p * dp;
        }
    }
    return g;
}

ComposeGrad compose_addition_backward(std::span<const ProbEmbedding> items,
                                      std::span<const double> d_mean, std::span<const double> d_var) {
    const std::size_t k = items.size(), D = d_mean.size();
    ComposeGrad g;
    g.d_mean.assign(k, Vec(d_mean.begin(), d_mean.end()));
    g.d_log_var.assign(k, Vec(D, 0.0));
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t d = 0; d < D; ++d) g.d_log_var[i][d] = d_var[d] * variance_grad(items[i].log_var[d]);
    return g;
}

ComposeGrad compose_mlp_backward(const FusionParams& p, const MlpCache& c,
                                 std::span<const double> d_mean, std::span<const double> d_var,
                                 FusionParams& grad) {
    const std::size_t D = p.embed_dim(), H = 2 * D, I = 4 * D;
    Vec d_out(2 * D);
    for (std::size_t d = 0; d < D; ++d) {
        d_out[d] = d_mean[d];
        d_out[D + d] = d_var[d] * variance_grad(c.output[D + d]);
    }
    Vec d_hidden(H, 0.0);
    for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t o = 0; o < 2 * D; ++o) grad.w2(h, o) += c.hidden[h] * d_out[o];
        d_hidden[h] = dot(p.w2.row(h), d_out);
    }
    for (std::size_t o = 0; o < 2 * D; ++o) grad.b2[o] += d_out[o];
    Vec d_pre(H);
    for (std::size_t h = 0; h < H; ++h) d_pre[h] = d_hidden[h] * (1.0 - c.hidden[h] * c.hidden[h]);
    Vec d_in(I, 0.0);
    for (std::size_t i = 0; i < I; ++i) {
        for (std::size_t h = 0; h < H; ++h) grad.w1(i, h) += c.input[i] * d_pre[h];
        d_in[i] = dot(p.w1.row(i), d_pre);
    }
    for (std::size_t h = 0; h < H; ++h) grad.b1[h] += d_pre[h];

    ComposeGrad g;
    g.d_mean = {Vec(d_in.begin(), d_in.begin() + D), Vec(d_in.begin() + 2 * D, d_in.begin() + 3 * D)};
    g.d_log_var = {Vec(d_in.begin() + D, d_in.begin() + 2 * D), Vec(d_in.begin() + 3 * D, d_in.end())};
    return g;
}

}  // namespace mpc
