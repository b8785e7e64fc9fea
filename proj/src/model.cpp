#include "mpc/model.hpp"

#include "mpc/error.hpp"
#include "mpc/rng.hpp"

namespace mpc {

ModelParams init_model(EmbedderDims dims, bool with_fusion, std::uint64_t seed) {
    ModelParams m;
    m.image_head = init_params(dims, stream_key({seed, 1}));
    m.text_head = init_params(dims, stream_key({seed, 2}));
    if (with_fusion) m.fusion = init_fusion_params(dims.embed, stream_key({seed, 3}));
    return m;
}

ModelParams zeros_like(const ModelParams& m) {
    ModelParams z;
    z.image_head = zeros_like(m.image_head);
    z.text_head = zeros_like(m.text_head);
    if (m.fusion) z.fusion = zeros_like(*m.fusion);
    return z;
}

void validate(const ModelParams& m) {
    validate(m.image_head);
    validate(m.text_head);
    if (m.image_head.embed_dim() != m.text_head.embed_dim())
        throw Error(ErrorCode::DimensionMismatch, "image and text heads have different output dimensions");
    if (m.image_head.feature_dim() != m.text_head.feature_dim())
        throw Error(ErrorCode::DimensionMismatch, "image and text heads expect different token dimensions");
    if (m.fusion && m.fusion->embed_dim() != m.embed_dim())
        throw Error(ErrorCode::DimensionMismatch, "fusion parameters do not match head output dimension");
}

namespace {

template <typename View, typename Head, typename Fusion, typename Out>
void collect(Head& image, Head& text, Fusion* fusion, Out& out) {
    auto add_matrix = [&](std::string name, auto& m) {
        out.push_back(View{std::move(name), {static_cast<std::uint32_t>(m.rows), static_cast<std::uint32_t>(m.cols)},
                           {m.data.data(), m.data.size()}});
    };
    auto add_vector = [&](std::string name, auto& v) {
        out.push_back(View{std::move(name), {static_cast<std::uint32_t>(v.size())}, {v.data(), v.size()}});
    };
    auto add_head = [&](const std::string& prefix, auto& h) {
        add_matrix(prefix + ".proj_w", h.proj_w);
        add_vector(prefix + ".proj_b", h.proj_b);
        add_matrix(prefix + ".attn_w1", h.attn_w1);
        add_vector(prefix + ".attn_w2", h.attn_w2);
        add_matrix(prefix + ".fc_w", h.fc_w);
        add_vector(prefix + ".fc_b", h.fc_b);
    };
    add_head("image", image);
    add_head("text", text);
    if (fusion) {
        add_matrix("fusion.w1", fusion->w1);
        add_vector("fusion.b1", fusion->b1);
        add_matrix("fusion.w2", fusion->w2);
        add_vector("fusion.b2", fusion->b2);
    }
}

}  // namespace

std::vector<TensorView> tensors(ModelParams& m) {
    std::vector<TensorView> out;
    collect<TensorView>(m.image_head, m.text_head, m.fusion ? &*m.fusion : nullptr, out);
    return out;
}

std::vector<ConstTensorView> tensors(const ModelParams& m) {
    std::vector<ConstTensorView> out;
    collect<ConstTensorView>(m.image_head, m.text_head, m.fusion ? &*m.fusion : nullptr, out);
    return out;
}

}  // namespace mpc
