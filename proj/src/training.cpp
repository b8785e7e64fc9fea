#include "mpc/training.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "mpc/error.hpp"
#include "mpc/rng.hpp"

namespace mpc {

using nlohmann::json;
using nlohmann::ordered_json;

void validate(const TrainConfig& c) {
    auto bad = [](const std::string& why) { throw Error(ErrorCode::InvalidArgument, "train config: " + why); };
    if (c.batch_size < 1) bad("batch_size must be >= 1");
    if (!(c.lambda_l2 >= 0.0)) bad("lambda_l2 must be >= 0");
    if (!(c.learning_rate > 0.0)) bad("learning_rate must be > 0");
    if (c.sim.j_samples < 1) bad("j_samples must be >= 1");
    if (c.hidden_dim < 1 || c.embed_dim < 1) bad("hidden_dim and embed_dim must be >= 1");
}

std::string train_config_to_json(const TrainConfig& c) {
    ordered_json j;
    j["batch_size"] = c.batch_size;
    j["lambda_l2"] = c.lambda_l2;
    j["learning_rate"] = c.learning_rate;
    j["steps"] = c.steps;
    j["seed"] = c.seed;
    j["j_samples"] = c.sim.j_samples;
    j["sim_seed"] = c.sim.seed;
    j["composer"] = to_string(c.composer);
    j["similarity"] = to_string(c.similarity);
    j["hidden_dim"] = c.hidden_dim;
    j["embed_dim"] = c.embed_dim;
    j["contrastive"] = c.contrastive;
    return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        TrainConfig c;
        c.batch_size = j.value("batch_size", c.batch_size);
        c.lambda_l2 = j.value("lambda_l2", c.lambda_l2);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.steps = j.value("steps", c.steps);
        c.seed = j.value("seed", c.seed);
        c.sim.j_samples = j.value("j_samples", c.sim.j_samples);
        c.sim.seed = j.value("sim_seed", c.sim.seed);
        c.composer = parse_composer(j.value("composer", std::string(to_string(c.composer))));
        c.similarity = parse_similarity(j.value("similarity", std::string(to_string(c.similarity))));
        c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
        c.embed_dim = j.value("embed_dim", c.embed_dim);
        c.contrastive = j.value("contrastive", c.contrastive);
        validate(c);
        return c;
    } catch (const json::exception& ex) {
        throw Error(ErrorCode::Parse, std::string("train config: ") + ex.what());
    }
}

// ---- losses -----------------------------------------------------------------

double contrastive_loss(const Matrix& s) {
    const std::size_t B = s.rows;
    if (B == 0 || s.cols != B) throw Error(ErrorCode::DimensionMismatch, "score matrix must be square and nonempty");
    double total = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
        const auto row = s.row(i);
        const double mx = *std::max_element(row.begin(), row.end());
        double acc = 0.0;
        for (double v : row) acc += std::exp(v - mx);
        total += mx + std::log(acc) - row[i];
    }
    return total / static_cast<double>(B);
}

Matrix contrastive_loss_grad(const Matrix& s) {
    const std::size_t B = s.rows;
    Matrix g(B, B);
    for (std::size_t i = 0; i < B; ++i) {
        const auto row = s.row(i);
        const double mx = *std::max_element(row.begin(), row.end());
        double acc = 0.0;
        for (double v : row) acc += std::exp(v - mx);
        for (std::size_t j = 0; j < B; ++j) g(i, j) = std::exp(row[j] - mx) / acc / static_cast<double>(B);
        g(i, i) -= 1.0 / static_cast<double>(B);
    }
    return g;
}

namespace {

std::uint64_t query_noise_stream(std::uint64_t row_stream) { return stream_key({row_stream, 1}); }
std::uint64_t pairwise_target_stream(std::uint64_t row_stream) { return stream_key({row_stream, 2}); }

// Target-side noise: mpc uses the row stream directly so that entry (i, j)
// equals sim_mpc(c_i, t_j, cfg, stream_j).
Matrix target_noise(std::size_t dim, SimilarityKind kind, const SimConfig& cfg, std::uint64_t stream) {
    return noise_matrix(dim, cfg, kind == SimilarityKind::Mpc ? stream : pairwise_target_stream(stream));
}

}  // namespace

Matrix similarity_matrix(std::span<const CompositeGaussian> queries, std::span<const ProbEmbedding> targets,
                         std::span<const std::uint64_t> streams, SimilarityKind kind, const SimConfig& cfg) {
    const std::size_t B = queries.size();
    if (targets.size() != B || streams.size() != B)
        throw Error(ErrorCode::DimensionMismatch, "queries, targets and streams must have equal length");
    if (B == 0) throw Error(ErrorCode::DimensionMismatch, "empty batch");
    const std::size_t D = queries[0].dim();
    for (std::size_t i = 0; i < B; ++i) {
        if (queries[i].dim() != D || targets[i].dim() != D)
            throw Error(ErrorCode::DimensionMismatch, "batch members differ in dimension");
    }
    std::vector<Matrix> tz(B);
    for (std::size_t j = 0; j < B; ++j) tz[j] = reparameterize(targets[j], target_noise(D, kind, cfg, streams[j]));
    Matrix s(B, B);
    if (kind == SimilarityKind::Mpc) {
        for (std::size_t i = 0; i < B; ++i)
            for (std::size_t j = 0; j < B; ++j) s(i, j) = mpc_score(queries[i], tz[j]);
    } else {
        for (std::size_t i = 0; i < B; ++i) {
            const Matrix qz = reparameterize(queries[i], noise_matrix(D, cfg, query_noise_stream(streams[i])));
            for (std::size_t j = 0; j < B; ++j) s(i, j) = pairwise_score(qz, tz[j]);
        }
    }
    return s;
}

double contrastive_loss(std::span<const CompositeGaussian> queries, std::span<const ProbEmbedding> targets,
                        std::span<const std::uint64_t> streams, SimilarityKind kind, const SimConfig& cfg) {
    return contrastive_loss(similarity_matrix(queries, targets, streams, kind, cfg));
}

double logvar_regularizer(std::span<const std::vector<ProbEmbedding>> inputs) {
    if (inputs.empty()) throw Error(ErrorCode::InvalidArgument, "regularizer over an empty batch");
    double total = 0.0;
    for (const auto& row : inputs) {
        if (row.empty()) throw Error(ErrorCode::EmptyQuery, "regularizer row has no inputs");
        double row_sum = 0.0;
        for (const auto& e : row) {
            double s = 0.0;
            for (double lv : e.log_var) s += lv * lv;
            row_sum += s / static_cast<double>(e.dim());
        }
        total += row_sum / static_cast<double>(row.size());
    }
    return total / static_cast<double>(inputs.size());
}

double total_loss(double contrastive, double regularizer, double lambda_l2) {
    return contrastive + lambda_l2 * regularizer;
}

// ---- batch forward / backward ------------------------------------------------

LossBreakdown batch_loss(const ModelParams& model, const Batch& batch, const TrainConfig& cfg, ModelParams* grad) {
    const std::size_t B = batch.size();
    if (B == 0) throw Error(ErrorCode::InvalidArgument, "empty batch");
    const std::size_t D = model.embed_dim();
    const bool mlp = cfg.composer == ComposerKind::Mlp;
    if (mlp && !model.fusion) throw Error(ErrorCode::InvalidArgument, "mlp composer requires fusion parameters");

    std::vector<std::vector<EmbedCache>> in_cache(B);
    std::vector<std::vector<ProbEmbedding>> inputs(B);
    std::vector<CompositeGaussian> composites(B);
    std::vector<MlpCache> mlp_cache(B);
    std::vector<EmbedCache> tgt_cache(B);
    std::vector<ProbEmbedding> targets(B);
    std::vector<std::uint64_t> streams(B);

    for (std::size_t i = 0; i < B; ++i) {
        const TrainingRow& row = batch[i];
        if (row.inputs.empty()) throw Error(ErrorCode::EmptyQuery, "training row has no inputs");
        for (const TokenSet& ts : row.inputs) {
            in_cache[i].push_back(embed_head_forward(ts, model.head(ts.modality)));
            inputs[i].push_back(in_cache[i].back().out);
        }
        switch (cfg.composer) {
            case ComposerKind::Product: composites[i] = compose_many(inputs[i]); break;
            case ComposerKind::Addition: composites[i] = compose_addition(inputs[i]); break;
            case ComposerKind::Mlp:
                if (inputs[i].size() != 2)
                    throw Error(ErrorCode::UnsupportedArity, "mlp fusion composes exactly 2 inputs");
                composites[i] = compose_mlp(inputs[i][0], inputs[i][1], *model.fusion, &mlp_cache[i]);
                break;
        }
        tgt_cache[i] = embed_head_forward(row.target, model.image_head);
        targets[i] = tgt_cache[i].out;
        streams[i] = row.stream;
    }

    LossBreakdown out;
    out.regularizer = logvar_regularizer(inputs);

    std::vector<Matrix> t_eps(B), t_z(B), q_eps, q_z;
    Matrix scores;
    if (cfg.contrastive) {
        for (std::size_t j = 0; j < B; ++j) {
            t_eps[j] = target_noise(D, cfg.similarity, cfg.sim, streams[j]);
            t_z[j] = reparameterize(targets[j], t_eps[j]);
        }
        scores = Matrix(B, B);
        if (cfg.similarity == SimilarityKind::Mpc) {
            for (std::size_t i = 0; i < B; ++i)
                for (std::size_t j = 0; j < B; ++j) scores(i, j) = mpc_score(composites[i], t_z[j]);
        } else {
            q_eps.resize(B);
            q_z.resize(B);
            for (std::size_t i = 0; i < B; ++i) {
                q_eps[i] = noise_matrix(D, cfg.sim, query_noise_stream(streams[i]));
                q_z[i] = reparameterize(composites[i], q_eps[i]);
            }
            for (std::size_t i = 0; i < B; ++i)
                for (std::size_t j = 0; j < B; ++j) scores(i, j) = pairwise_score(q_z[i], t_z[j]);
        }
        out.contrastive = contrastive_loss(scores);
    }
    out.total = total_loss(out.contrastive, out.regularizer, cfg.lambda_l2);
    if (grad == nullptr) return out;

    *grad = zeros_like(model);
    std::vector<CompositeGrad> dc(B, CompositeGrad(D));
    std::vector<Matrix> d_tz(B, Matrix(cfg.sim.j_samples, D));

    if (cfg.contrastive) {
        const Matrix ds = contrastive_loss_grad(scores);
        if (cfg.similarity == SimilarityKind::Mpc) {
            for (std::size_t i = 0; i < B; ++i)
                for (std::size_t j = 0; j < B; ++j) mpc_score_backward(composites[i], t_z[j], ds(i, j), dc[i], d_tz[j]);
        } else {
            std::vector<Matrix> d_qz(B, Matrix(cfg.sim.j_samples, D));
            for (std::size_t i = 0; i < B; ++i)
                for (std::size_t j = 0; j < B; ++j) pairwise_score_backward(q_z[i], t_z[j], ds(i, j), d_qz[i], d_tz[j]);
            for (std::size_t i = 0; i < B; ++i) reparameterize_backward(composites[i], q_eps[i], d_qz[i], dc[i]);
        }
        for (std::size_t j = 0; j < B; ++j) {
            Vec dm(D, 0.0), dlv(D, 0.0);
            reparameterize_backward(targets[j], t_eps[j], d_tz[j], dm, dlv);
            embed_head_backward(batch[j].target, model.image_head, tgt_cache[j], dm, dlv, grad->image_head);
        }
    }

    for (std::size_t i = 0; i < B; ++i) {
        ComposeGrad cg;
        switch (cfg.composer) {
            case ComposerKind::Product:
                cg = compose_product_backward(inputs[i], composites[i], dc[i].d_mean, dc[i].d_var, dc[i].d_log_z);
                break;
            case ComposerKind::Addition:
                cg = compose_addition_backward(inputs[i], dc[i].d_mean, dc[i].d_var);
                break;
            case ComposerKind::Mlp:
                cg = compose_mlp_backward(*model.fusion, mlp_cache[i], dc[i].d_mean, dc[i].d_var, *grad->fusion);
                break;
        }
        const double reg_scale =
            cfg.lambda_l2 * 2.0 / (static_cast<double>(B) * static_cast<double>(inputs[i].size()) * static_cast<double>(D));
        for (std::size_t k = 0; k < inputs[i].size(); ++k) {
            for (std::size_t d = 0; d < D; ++d) cg.d_log_var[k][d] += reg_scale * inputs[i][k].log_var[d];
            const TokenSet& ts = batch[i].inputs[k];
            embed_head_backward(ts, model.head(ts.modality), in_cache[i][k], cg.d_mean[k], cg.d_log_var[k],
                                grad->head(ts.modality));
        }
    }
    return out;
}

ModelParams gradients(const ModelParams& model, const Batch& batch, const TrainConfig& cfg) {
    ModelParams g;
    batch_loss(model, batch, cfg, &g);
    return g;
}

// ---- optimizer --------------------------------------------------------------

AdamState init_adam(const ModelParams& model) {
    AdamState s;
    for (const auto& t : tensors(model)) {
        s.m.emplace_back(t.data.size(), 0.0);
        s.v.emplace_back(t.data.size(), 0.0);
    }
    return s;
}

void optimizer_step(ModelParams& model, const ModelParams& grad, AdamState& state, double lr) {
    auto params = tensors(model);
    const auto grads = tensors(grad);
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw Error(ErrorCode::ShapeMismatch, "optimizer state does not match model");
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(kAdamBeta1, t);
    const double c2 = 1.0 - std::pow(kAdamBeta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto p = params[k].data;
        const auto g = grads[k].data;
        if (g.size() != p.size() || state.m[k].size() != p.size())
            throw Error(ErrorCode::ShapeMismatch, "gradient shape mismatch for " + params[k].name);
        Vec& m = state.m[k];
        Vec& v = state.v[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * g[i];
            v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
            p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kAdamEps);
        }
    }
}

// ---- data sampling and loop -----------------------------------------------------

BatchSampler::BatchSampler(const TokenProvider& tokens, std::span<const std::uint64_t> train_images,
                           std::vector<ConceptTuple> compositions)
    : tokens_(&tokens), index_(tokens.annotations(), train_images), compositions_(std::move(compositions)) {
    if (compositions_.empty()) throw Error(ErrorCode::InvalidArgument, "no training compositions");
    for (const auto& c : compositions_) {
        auto imgs = index_.images_with_all(c);
        if (imgs.empty())
            throw Error(ErrorCode::InvalidArgument, "a training composition has no training images");
        targets_.push_back(std::move(imgs));
    }
}

Batch BatchSampler::sample(std::size_t batch_size, std::size_t step, std::uint64_t seed) const {
    Rng rng(stream_key({seed, 0xba7c, step}));
    Batch batch;
    batch.reserve(batch_size);
    for (std::size_t r = 0; r < batch_size; ++r) {
        const std::size_t ci = static_cast<std::size_t>(rng.below(compositions_.size()));
        const ConceptTuple& comp = compositions_[ci];
        TrainingRow row;
        for (std::size_t pos = 0; pos < comp.size(); ++pos) {
            const std::uint32_t c = comp[pos];
            if (rng.coin()) {
                row.inputs.push_back(tokens_->text(c, stream_key({seed, step, r, pos})));
            } else {
                const auto imgs = index_.images_with(c);
                row.inputs.push_back(tokens_->crop(imgs[rng.below(imgs.size())], c));
            }
        }
        const auto& tgts = targets_[ci];
        row.target = tokens_->image(tgts[rng.below(tgts.size())]);
        row.stream = stream_key({seed, 0x57e, step, r});
        batch.push_back(std::move(row));
    }
    return batch;
}

TrainResult train_loop(const BatchSampler& sampler, const TrainConfig& cfg, const StepCallback& on_step) {
    validate(cfg);
    ModelParams model = init_model({sampler.feature_dim(), cfg.hidden_dim, cfg.embed_dim},
                                   cfg.composer == ComposerKind::Mlp, cfg.seed);
    AdamState adam = init_adam(model);
    return train_loop(sampler, cfg, std::move(model), std::move(adam), on_step);
}

TrainResult train_loop(const BatchSampler& sampler, const TrainConfig& cfg, ModelParams model, AdamState adam,
                       const StepCallback& on_step) {
    validate(cfg);
    TrainResult r;
    r.model = std::move(model);
    r.adam = std::move(adam);
    r.losses.reserve(cfg.steps + 1);
    const std::uint64_t first_step = r.adam.step;
    for (std::size_t s = 0; s <= cfg.steps; ++s) {
        const Batch batch = sampler.sample(cfg.batch_size, first_step + s, cfg.seed);
        LossBreakdown lb;
        if (s < cfg.steps) {
            ModelParams grad;
            lb = batch_loss(r.model, batch, cfg, &grad);
            optimizer_step(r.model, grad, r.adam, cfg.learning_rate);
        } else {
            lb = batch_loss(r.model, batch, cfg);
        }
        r.losses.push_back(lb.total);
        if (on_step) on_step(s, lb);
    }
    return r;
}

}  // namespace mpc
