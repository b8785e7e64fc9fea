#include "mpc/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mpc/rng.hpp"

namespace mpc {

double GradCheckReport::worst() const {
    double w = 0.0;
    for (const auto& g : groups) w = std::max(w, g.max_rel_error);
    return w;
}

ModelParams random_model(const GradCheckInstance& inst, bool with_fusion, std::uint64_t seed) {
    ModelParams m = init_model({inst.feature_dim, inst.hidden_dim, inst.embed_dim}, with_fusion, seed);
    Rng rng(stream_key({seed, 0x9c}));
    for (auto& t : tensors(m))
        for (double& v : t.data) v += 0.3 * rng.normal();
    return m;
}

Batch random_batch(const GradCheckInstance& inst, std::uint64_t seed) {
    Rng rng(stream_key({seed, 0xba7c}));
    auto tokens = [&](Modality m) {
        TokenSet ts{Matrix(inst.tokens, inst.feature_dim), m};
        for (double& v : ts.tokens.data) v = rng.normal();
        return ts;
    };
    Batch b;
    for (std::size_t r = 0; r < inst.batch; ++r) {
        TrainingRow row;
        for (std::size_t i = 0; i < inst.arity; ++i)
            row.inputs.push_back(tokens((r + i) % 2 == 0 ? Modality::Image : Modality::Text));
        row.target = tokens(Modality::Image);
        row.stream = stream_key({seed, 0x5eed, r});
        b.push_back(std::move(row));
    }
    return b;
}

GradCheckReport check_gradients(const ModelParams& model, const Batch& batch, const TrainConfig& cfg, double step) {
    GradCheckReport rep;
    rep.composer = cfg.composer;
    rep.similarity = cfg.similarity;
    rep.arity = batch.empty() ? 0 : batch.front().inputs.size();

    const ModelParams analytic = gradients(model, batch, cfg);
    ModelParams probe = model;
    auto views = tensors(probe);
    const auto grads = tensors(analytic);
    for (std::size_t k = 0; k < views.size(); ++k) {
        double max_diff = 0.0, max_num = 0.0;
        for (std::size_t i = 0; i < views[k].data.size(); ++i) {
            double& p = views[k].data[i];
            const double orig = p;
            p = orig + step;
            const double up = batch_loss(probe, batch, cfg).total;
            p = orig - step;
            const double down = batch_loss(probe, batch, cfg).total;
            p = orig;
            const double numeric = (up - down) / (2.0 * step);
            max_diff = std::max(max_diff, std::abs(grads[k].data[i] - numeric));
            max_num = std::max(max_num, std::abs(numeric));
        }
        rep.groups.push_back({views[k].name, max_diff / std::max(max_num, 1e-6)});
    }
    return rep;
}

std::vector<GradCheckReport> check_all_gradients(std::uint64_t seed, const GradCheckInstance& inst) {
    std::vector<GradCheckReport> out;
    for (ComposerKind composer : {ComposerKind::Product, ComposerKind::Addition, ComposerKind::Mlp}) {
        for (SimilarityKind sim : {SimilarityKind::Mpc, SimilarityKind::McPairwise}) {
            std::vector<std::size_t> arities{2};
            if (composer == ComposerKind::Product) arities.push_back(3);
            for (std::size_t arity : arities) {
                GradCheckInstance in = inst;
                in.arity = arity;
                TrainConfig cfg;
                cfg.batch_size = in.batch;
                cfg.composer = composer;
                cfg.similarity = sim;
                cfg.sim.j_samples = in.j_samples;
                cfg.sim.seed = seed;
                cfg.embed_dim = in.embed_dim;
                cfg.hidden_dim = in.hidden_dim;
                // Scale the regularizer up so its gradient is visible next to the contrastive term.
                cfg.lambda_l2 = 0.1;
                const ModelParams model = random_model(in, composer == ComposerKind::Mlp, seed);
                out.push_back(check_gradients(model, random_batch(in, seed), cfg));
            }
        }
    }
    return out;
}

}  // namespace mpc
