#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpc/benchgen.hpp"
#include "mpc/data_source.hpp"

namespace mpc {

struct SynthWorldConfig {
    std::size_t num_concepts = 20;
    std::size_t token_dim = 16;
    std::size_t tokens_per_concept = 2;
    double image_noise = 0.15;
    double text_noise = 0.05;
    double modality_offset = 0.5;
    // Pairs that never co-occur. auto_forbidden adds the most dissimilar
    // prototype pairs on top of the explicit list.
    std::vector<ConceptTuple> forbidden_pairs;
    std::size_t auto_forbidden = 0;
    // Allowed compositions that images are drawn from. pairs < 0 means every
    // pair that is not forbidden.
    long pairs = -1;
    std::size_t triples = 0;
    std::size_t quads = 0;
    std::size_t images_per_composition = 12;
    std::uint64_t seed = 0;
};

void validate(const SynthWorldConfig& cfg);
std::string synth_config_to_json(const SynthWorldConfig& cfg);
SynthWorldConfig synth_config_from_json(const std::string& text);

// Deterministic concept world standing in for real backbones. Tokens are
// rounded to f32 at generation so in-memory and on-disk worlds agree exactly.
class SynthWorld final : public TokenProvider {
public:
    static SynthWorld generate(const SynthWorldConfig& cfg);

    const SynthWorldConfig& config() const { return cfg_; }
    const Matrix& prototypes() const { return text_model_.prototypes; }
    const SyntheticTextModel& text_model() const { return text_model_; }
    const std::vector<ConceptTuple>& forbidden_pairs() const { return forbidden_; }
    const std::vector<ConceptTuple>& allowed_compositions() const { return compositions_; }
    const Matrix& image_tokens(std::uint64_t image_id) const;

    std::size_t feature_dim() const override { return cfg_.token_dim; }
    const AnnotationSet& annotations() const override { return ann_; }
    TokenSet image(std::uint64_t image_id) const override;
    TokenSet crop(std::uint64_t image_id, std::uint32_t concept_id) const override;
    TokenSet text(std::uint32_t concept_id, std::uint64_t draw) const override;

    std::string manifest_json() const;
    // annotations.jsonl, manifest.json and tokens/<id>.mpct under dir.
    void write_to_dir(const std::string& dir) const;

private:
    SynthWorldConfig cfg_;
    SyntheticTextModel text_model_;
    std::vector<ConceptTuple> forbidden_;
    std::vector<ConceptTuple> compositions_;
    AnnotationSet ann_;
    std::vector<Matrix> tokens_;  // indexed by image_id - 1
};

}  // namespace mpc
