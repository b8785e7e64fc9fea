#include "mpc/synth_world.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include <json.hpp>

#include "mpc/binary_io.hpp"
#include "mpc/error.hpp"
#include "mpc/rng.hpp"
#include "mpc/token_io.hpp"

namespace mpc {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

bool has_forbidden_subpair(const ConceptTuple& t, const std::set<ConceptTuple>& forbidden) {
    for (std::size_t i = 0; i < t.size(); ++i)
        for (std::size_t j = i + 1; j < t.size(); ++j)
            if (forbidden.count({t[i], t[j]}) != 0) return true;
    return false;
}

}  // namespace

void validate(const SynthWorldConfig& c) {
    auto bad = [](const std::string& why) { throw Error(ErrorCode::InvalidArgument, "synthetic world config: " + why); };
    if (c.num_concepts < 2) bad("num_concepts must be >= 2");
    if (c.token_dim < 2) bad("token_dim must be >= 2");
    if (c.tokens_per_concept < 1) bad("tokens_per_concept must be >= 1");
    if (c.images_per_composition < 1) bad("images_per_composition must be >= 1");
    if (!(c.image_noise >= 0.0) || !(c.text_noise >= 0.0) || !(c.modality_offset >= 0.0))
        bad("noise and offset scales must be >= 0");
    for (const auto& p : c.forbidden_pairs) {
        if (p.size() != 2 || p[0] == p[1] || p[0] >= c.num_concepts || p[1] >= c.num_concepts)
            bad("forbidden pairs must name two distinct concepts below num_concepts");
    }
}

std::string synth_config_to_json(const SynthWorldConfig& c) {
    ordered_json j;
    j["num_concepts"] = c.num_concepts;
    j["token_dim"] = c.token_dim;
    j["tokens_per_concept"] = c.tokens_per_concept;
    j["image_noise"] = c.image_noise;
    j["text_noise"] = c.text_noise;
    j["modality_offset"] = c.modality_offset;
    j["forbidden_pairs"] = c.forbidden_pairs;
    j["auto_forbidden"] = c.auto_forbidden;
    j["pairs"] = c.pairs;
    j["triples"] = c.triples;
    j["quads"] = c.quads;
    j["images_per_composition"] = c.images_per_composition;
    j["seed"] = c.seed;
    return j.dump(2);
}

SynthWorldConfig synth_config_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        SynthWorldConfig c;
        c.num_concepts = j.value("num_concepts", c.num_concepts);
        c.token_dim = j.value("token_dim", c.token_dim);
        c.tokens_per_concept = j.value("tokens_per_concept", c.tokens_per_concept);
        c.image_noise = j.value("image_noise", c.image_noise);
        c.text_noise = j.value("text_noise", c.text_noise);
        c.modality_offset = j.value("modality_offset", c.modality_offset);
        if (j.contains("forbidden_pairs")) c.forbidden_pairs = j["forbidden_pairs"].get<std::vector<ConceptTuple>>();
        c.auto_forbidden = j.value("auto_forbidden", c.auto_forbidden);
        c.pairs = j.value("pairs", c.pairs);
        c.triples = j.value("triples", c.triples);
        c.quads = j.value("quads", c.quads);
        c.images_per_composition = j.value("images_per_composition", c.images_per_composition);
        c.seed = j.value("seed", c.seed);
        validate(c);
        return c;
    } catch (const json::exception& ex) {
        throw Error(ErrorCode::Parse, std::string("synthetic world config: ") + ex.what());
    }
}

SynthWorld SynthWorld::generate(const SynthWorldConfig& cfg) {
    validate(cfg);
    const std::size_t C = cfg.num_concepts, F = cfg.token_dim;
    SynthWorld w;
    w.cfg_ = cfg;

    Rng proto_rng(stream_key({cfg.seed, 0x9a0}));
    Matrix protos(C, F);
    for (std::size_t c = 0; c < C; ++c) {
        auto row = protos.row(c);
        for (double& v : row) v = proto_rng.normal();
        const double n = norm(row);
        for (double& v : row) v /= n;
    }
    Vec direction(F);
    for (double& v : direction) v = proto_rng.normal();
    const double dn = norm(direction);
    for (double& v : direction) v /= dn;
    w.text_model_ = SyntheticTextModel{protos, direction, cfg.modality_offset, cfg.text_noise, cfg.seed};

    // Forbidden pairs: explicit list, then the most dissimilar prototype pairs.
    std::set<ConceptTuple> forbidden;
    for (auto p : cfg.forbidden_pairs) {
        std::sort(p.begin(), p.end());
        forbidden.insert(p);
    }
    if (cfg.auto_forbidden > 0) {
        std::vector<std::pair<double, ConceptTuple>> ranked;
        for (std::uint32_t a = 0; a < C; ++a)
            for (std::uint32_t b = a + 1; b < C; ++b)
                if (forbidden.count({a, b}) == 0) ranked.push_back({dot(protos.row(a), protos.row(b)), {a, b}});
        std::sort(ranked.begin(), ranked.end());
        for (std::size_t i = 0; i < cfg.auto_forbidden && i < ranked.size(); ++i) forbidden.insert(ranked[i].second);
    }
    w.forbidden_.assign(forbidden.begin(), forbidden.end());

    // Allowed compositions.
    std::vector<ConceptTuple> allowed_pairs;
    for (std::uint32_t a = 0; a < C; ++a)
        for (std::uint32_t b = a + 1; b < C; ++b)
            if (forbidden.count({a, b}) == 0) allowed_pairs.push_back({a, b});
    Rng comp_rng(stream_key({cfg.seed, 0xc0}));
    if (cfg.pairs < 0) {
        w.compositions_ = allowed_pairs;
    } else {
        if (static_cast<std::size_t>(cfg.pairs) > allowed_pairs.size())
            throw Error(ErrorCode::ConfigInfeasible, "requested " + std::to_string(cfg.pairs) + " pair compositions but only " +
                                                         std::to_string(allowed_pairs.size()) + " pairs are allowed");
        comp_rng.shuffle(allowed_pairs);
        allowed_pairs.resize(static_cast<std::size_t>(cfg.pairs));
        std::sort(allowed_pairs.begin(), allowed_pairs.end());
        w.compositions_ = allowed_pairs;
    }
    auto add_tuples = [&](std::size_t arity, std::size_t count) {
        if (count == 0) return;
        if (arity > C) throw Error(ErrorCode::ConfigInfeasible, "arity exceeds num_concepts");
        std::set<ConceptTuple> found;
        std::vector<std::uint32_t> universe(C);
        for (std::uint32_t c = 0; c < C; ++c) universe[c] = c;
        std::size_t attempts = 0;
        const std::size_t max_attempts = 100000 + 100 * count;
        while (found.size() < count) {
            if (attempts++ >= max_attempts)
                throw Error(ErrorCode::ConfigInfeasible, "cannot find " + std::to_string(count) + " compositions of arity " +
                                                             std::to_string(arity) + " avoiding forbidden pairs");
            for (std::size_t i = 0; i < arity; ++i) std::swap(universe[i], universe[i + comp_rng.below(C - i)]);
            ConceptTuple t(universe.begin(), universe.begin() + static_cast<std::ptrdiff_t>(arity));
            std::sort(t.begin(), t.end());
            if (!has_forbidden_subpair(t, forbidden)) found.insert(t);
        }
        w.compositions_.insert(w.compositions_.end(), found.begin(), found.end());
    };
    add_tuples(3, cfg.triples);
    add_tuples(4, cfg.quads);
    if (w.compositions_.empty())
        throw Error(ErrorCode::ConfigInfeasible, "forbidden pairs exclude every composition");

    // Images: images_per_composition per allowed composition, ids from 1.
    Rng img_rng(stream_key({cfg.seed, 0x1a6}));
    const std::size_t t = cfg.tokens_per_concept;
    std::uint64_t next_id = 1;
    for (const auto& comp : w.compositions_) {
        for (std::size_t r = 0; r < cfg.images_per_composition; ++r) {
            Matrix tokens(comp.size() * t, F);
            for (std::size_t ci = 0; ci < comp.size(); ++ci)
                for (std::size_t k = 0; k < t; ++k)
                    for (std::size_t f = 0; f < F; ++f)
                        tokens(ci * t + k, f) = to_f32(protos(comp[ci], f) + cfg.image_noise * img_rng.normal());
            w.ann_.entries.push_back({next_id++, comp});
            w.tokens_.push_back(std::move(tokens));
        }
    }
    return w;
}

const Matrix& SynthWorld::image_tokens(std::uint64_t image_id) const {
    if (image_id == 0 || image_id > tokens_.size())
        throw Error(ErrorCode::InvalidArgument, "unknown image id " + std::to_string(image_id));
    return tokens_[image_id - 1];
}

TokenSet SynthWorld::image(std::uint64_t image_id) const { return {image_tokens(image_id), Modality::Image}; }

TokenSet SynthWorld::crop(std::uint64_t image_id, std::uint32_t concept_id) const {
    const AnnotationEntry& e = ann_.entries.at(image_id - 1);
    return {crop_rows(image_tokens(image_id), e, concept_id, cfg_.tokens_per_concept), Modality::Image};
}

TokenSet SynthWorld::text(std::uint32_t concept_id, std::uint64_t draw) const {
    return text_model_.text(concept_id, draw);
}

std::string SynthWorld::manifest_json() const {
    ordered_json j;
    j["format"] = "mpc-synth-world";
    j["version"] = 1;
    j["seed"] = cfg_.seed;
    j["config"] = json::parse(synth_config_to_json(cfg_));
    j["num_images"] = ann_.entries.size();
    j["token_dim"] = cfg_.token_dim;
    j["tokens_per_concept"] = cfg_.tokens_per_concept;
    std::vector<std::vector<double>> protos;
    for (std::size_t c = 0; c < prototypes().rows; ++c) {
        auto row = prototypes().row(c);
        protos.emplace_back(row.begin(), row.end());
    }
    j["prototypes"] = protos;
    j["text_model"] = {{"direction", text_model_.direction},
                       {"offset", text_model_.offset},
                       {"noise", text_model_.noise},
                       {"seed", text_model_.seed}};
    j["forbidden_pairs"] = forbidden_;
    j["compositions"] = compositions_;
    return j.dump(2) + "\n";
}

void SynthWorld::write_to_dir(const std::string& dir) const {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(dir) / "tokens", ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create " + dir + ": " + ec.message());
    write_annotations_jsonl(ann_, (fs::path(dir) / "annotations.jsonl").string());
    binary::write_file((fs::path(dir) / "manifest.json").string(), manifest_json());
    for (const auto& e : ann_.entries)
        write_tokens(tokens_[e.image_id - 1],
                     (fs::path(dir) / "tokens" / (std::to_string(e.image_id) + ".mpct")).string());
}

// ---- token providers --------------------------------------------------------

TokenSet SyntheticTextModel::text(std::uint32_t concept_id, std::uint64_t draw) const {
    if (concept_id >= prototypes.rows)
        throw Error(ErrorCode::InvalidArgument, "unknown concept " + std::to_string(concept_id));
    const std::size_t F = prototypes.cols;
    Matrix tok(1, F);
    const std::uint64_t stream = stream_key({0x7e47, concept_id, draw});
    for (std::size_t f = 0; f < F; ++f)
        tok(0, f) = to_f32(prototypes(concept_id, f) + offset * direction[f] + noise * counter_normal(seed, stream, f));
    return {std::move(tok), Modality::Text};
}

Matrix crop_rows(const Matrix& image_tokens, const AnnotationEntry& entry, std::uint32_t concept_id,
                 std::size_t tokens_per_concept) {
    auto it = std::lower_bound(entry.categories.begin(), entry.categories.end(), concept_id);
    if (it == entry.categories.end() || *it != concept_id)
        throw Error(ErrorCode::InvalidArgument, "image " + std::to_string(entry.image_id) + " does not contain concept " +
                                                    std::to_string(concept_id));
    const auto pos = static_cast<std::size_t>(it - entry.categories.begin());
    const std::size_t t = tokens_per_concept;
    if ((pos + 1) * t > image_tokens.rows)
        throw Error(ErrorCode::ShapeMismatch, "image " + std::to_string(entry.image_id) + " has too few tokens to crop");
    Matrix out(t, image_tokens.cols);
    std::copy(image_tokens.data.begin() + static_cast<std::ptrdiff_t>(pos * t * image_tokens.cols),
              image_tokens.data.begin() + static_cast<std::ptrdiff_t>((pos + 1) * t * image_tokens.cols),
              out.data.begin());
    return out;
}

}  // namespace mpc
