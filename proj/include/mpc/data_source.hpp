#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "mpc/benchgen.hpp"
#include "mpc/embedder.hpp"

namespace mpc {

// Source of token sets for full images, single-concept crops and concept words.
class TokenProvider {
public:
    virtual ~TokenProvider() = default;

    virtual std::size_t feature_dim() const = 0;
    virtual const AnnotationSet& annotations() const = 0;
    virtual TokenSet image(std::uint64_t image_id) const = 0;
    // Tokens of one concept inside an annotated image.
    virtual TokenSet crop(std::uint64_t image_id, std::uint32_t concept_id) const = 0;
    // Word tokens for a concept; `draw` selects the noise realization.
    virtual TokenSet text(std::uint32_t concept_id, std::uint64_t draw) const = 0;
};

// Text tokens generated from concept prototypes:
//   prototype + offset * direction + noise * eps(seed, concept, draw).
struct SyntheticTextModel {
    Matrix prototypes;  // C x F
    Vec direction;      // F, unit norm
    double offset = 0.0;
    double noise = 0.0;
    std::uint64_t seed = 0;

    TokenSet text(std::uint32_t concept_id, std::uint64_t draw) const;
};

// Images are laid out as consecutive blocks of tokens_per_concept rows, one
// block per concept in ascending concept order.
Matrix crop_rows(const Matrix& image_tokens, const AnnotationEntry& entry, std::uint32_t concept_id,
                 std::size_t tokens_per_concept);

// Reads a data directory written by gen-synth (or prepared externally):
//   annotations.jsonl, manifest.json, tokens/<id>.mpct,
//   optional crops/<id>_<concept>.mpct and text/<concept>.mpct.
class DirectoryTokenProvider final : public TokenProvider {
public:
    explicit DirectoryTokenProvider(const std::string& dir);

    std::size_t feature_dim() const override { return feature_dim_; }
    const AnnotationSet& annotations() const override { return ann_; }
    TokenSet image(std::uint64_t image_id) const override;
    TokenSet crop(std::uint64_t image_id, std::uint32_t concept_id) const override;
    TokenSet text(std::uint32_t concept_id, std::uint64_t draw) const override;

private:
    std::string dir_;
    AnnotationSet ann_;
    std::size_t feature_dim_ = 0;
    std::size_t tokens_per_concept_ = 0;
    std::map<std::uint64_t, Matrix> images_;
    std::map<std::pair<std::uint64_t, std::uint32_t>, Matrix> crops_;
    std::map<std::uint32_t, Matrix> texts_;
    std::optional<SyntheticTextModel> text_model_;
};

}  // namespace mpc
