#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mpc/composer.hpp"
#include "mpc/embedder.hpp"

namespace mpc {

// One head per modality, plus fusion weights when the MLP composer is used.
struct ModelParams {
    EmbedderParams image_head;
    EmbedderParams text_head;
    std::optional<FusionParams> fusion;

    const EmbedderParams& head(Modality m) const { return m == Modality::Image ? image_head : text_head; }
    EmbedderParams& head(Modality m) { return m == Modality::Image ? image_head : text_head; }
    std::size_t embed_dim() const { return image_head.embed_dim(); }
    std::size_t feature_dim() const { return image_head.feature_dim(); }

    bool operator==(const ModelParams&) const = default;
};

ModelParams init_model(EmbedderDims dims, bool with_fusion, std::uint64_t seed);
ModelParams zeros_like(const ModelParams& m);
void validate(const ModelParams& m);

// Named view of one parameter tensor. Names are stable and used by the
// checkpoint format ("image.proj_w", "fusion.w1", ...).
struct TensorView {
    std::string name;
    std::vector<std::uint32_t> shape;
    std::span<double> data;
};

struct ConstTensorView {
    std::string name;
    std::vector<std::uint32_t> shape;
    std::span<const double> data;
};

std::vector<TensorView> tensors(ModelParams& m);
std::vector<ConstTensorView> tensors(const ModelParams& m);

}  // namespace mpc
