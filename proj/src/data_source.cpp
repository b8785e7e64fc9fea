#include "mpc/data_source.hpp"

#include <filesystem>

#include <json.hpp>

#include "mpc/binary_io.hpp"
#include "mpc/error.hpp"
#include "mpc/token_io.hpp"

namespace mpc {

namespace fs = std::filesystem;
using nlohmann::json;

DirectoryTokenProvider::DirectoryTokenProvider(const std::string& dir) : dir_(dir) {
    const fs::path root(dir);
    ann_ = read_annotations_jsonl((root / "annotations.jsonl").string());

    const fs::path manifest_path = root / "manifest.json";
    if (fs::exists(manifest_path)) {
        try {
            const json m = json::parse(binary::read_file(manifest_path.string()));
            tokens_per_concept_ = m.value("tokens_per_concept", std::size_t{0});
            if (m.contains("prototypes") && m.contains("text_model")) {
                const auto protos = m["prototypes"].get<std::vector<std::vector<double>>>();
                SyntheticTextModel tm;
                tm.prototypes = Matrix(protos.size(), protos.empty() ? 0 : protos[0].size());
                for (std::size_t c = 0; c < protos.size(); ++c)
                    std::copy(protos[c].begin(), protos[c].end(), tm.prototypes.row(c).begin());
                const auto& t = m["text_model"];
                tm.direction = t.at("direction").get<Vec>();
                tm.offset = t.at("offset").get<double>();
                tm.noise = t.at("noise").get<double>();
                tm.seed = t.at("seed").get<std::uint64_t>();
                text_model_ = std::move(tm);
            }
        } catch (const json::exception& ex) {
            throw Error(ErrorCode::Parse, manifest_path.string() + ": " + ex.what());
        }
    }

    for (const auto& e : ann_.entries) {
        const fs::path p = root / "tokens" / (std::to_string(e.image_id) + ".mpct");
        Matrix m = read_tokens(p.string());
        if (feature_dim_ == 0) feature_dim_ = m.cols;
        if (m.cols != feature_dim_)
            throw Error(ErrorCode::ShapeMismatch, p.string() + ": feature dim differs from other token files");
        images_.emplace(e.image_id, std::move(m));
    }
    const fs::path crops = root / "crops";
    if (fs::is_directory(crops)) {
        for (const auto& entry : fs::directory_iterator(crops)) {
            const std::string stem = entry.path().stem().string();
            const auto sep = stem.find('_');
            if (entry.path().extension() != ".mpct" || sep == std::string::npos) continue;
            const auto id = std::stoull(stem.substr(0, sep));
            const auto c = static_cast<std::uint32_t>(std::stoul(stem.substr(sep + 1)));
            crops_.emplace(std::make_pair(id, c), read_tokens(entry.path().string()));
        }
    }
    const fs::path texts = root / "text";
    if (fs::is_directory(texts)) {
        for (const auto& entry : fs::directory_iterator(texts)) {
            if (entry.path().extension() != ".mpct") continue;
            const auto c = static_cast<std::uint32_t>(std::stoul(entry.path().stem().string()));
            texts_.emplace(c, read_tokens(entry.path().string()));
        }
    }
    if (feature_dim_ == 0 && text_model_) feature_dim_ = text_model_->prototypes.cols;
}

TokenSet DirectoryTokenProvider::image(std::uint64_t image_id) const {
    auto it = images_.find(image_id);
    if (it == images_.end()) throw Error(ErrorCode::InvalidArgument, "no tokens for image " + std::to_string(image_id));
    return {it->second, Modality::Image};
}

TokenSet DirectoryTokenProvider::crop(std::uint64_t image_id, std::uint32_t concept_id) const {
    if (auto it = crops_.find({image_id, concept_id}); it != crops_.end()) return {it->second, Modality::Image};
    const AnnotationEntry* e = ann_.find(image_id);
    if (e == nullptr) throw Error(ErrorCode::InvalidArgument, "image " + std::to_string(image_id) + " is not annotated");
    if (tokens_per_concept_ == 0)
        throw Error(ErrorCode::InvalidArgument, "no crop file for image " + std::to_string(image_id) +
                                                    " and manifest lacks tokens_per_concept");
    return {crop_rows(image(image_id).tokens, *e, concept_id, tokens_per_concept_), Modality::Image};
}

TokenSet DirectoryTokenProvider::text(std::uint32_t concept_id, std::uint64_t draw) const {
    if (auto it = texts_.find(concept_id); it != texts_.end()) return {it->second, Modality::Text};
    if (!text_model_)
        throw Error(ErrorCode::InvalidArgument, "no text tokens for concept " + std::to_string(concept_id));
    return text_model_->text(concept_id, draw);
}

}  // namespace mpc
