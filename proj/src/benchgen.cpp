#include "mpc/benchgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mpc/error.hpp"
#include "mpc/rng.hpp"

namespace mpc {

using nlohmann::json;
using nlohmann::ordered_json;

// ---- annotations ------------------------------------------------------------

const AnnotationEntry* AnnotationSet::find(std::uint64_t image_id) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), image_id,
                               [](const AnnotationEntry& e, std::uint64_t id) { return e.image_id < id; });
    if (it != entries.end() && it->image_id == image_id) return &*it;
    // Entries are kept sorted by validate(); fall back to a scan otherwise.
    for (const auto& e : entries)
        if (e.image_id == image_id) return &e;
    return nullptr;
}

std::vector<std::uint32_t> AnnotationSet::categories() const {
    std::set<std::uint32_t> all;
    for (const auto& e : entries) all.insert(e.categories.begin(), e.categories.end());
    return {all.begin(), all.end()};
}

void validate(AnnotationSet& ann) {
    for (auto& e : ann.entries) {
        std::sort(e.categories.begin(), e.categories.end());
        e.categories.erase(std::unique(e.categories.begin(), e.categories.end()), e.categories.end());
        if (e.categories.empty())
            throw Error(ErrorCode::InvalidArgument, "image " + std::to_string(e.image_id) + " has no categories");
    }
    std::sort(ann.entries.begin(), ann.entries.end(),
              [](const AnnotationEntry& a, const AnnotationEntry& b) { return a.image_id < b.image_id; });
    for (std::size_t i = 1; i < ann.entries.size(); ++i)
        if (ann.entries[i].image_id == ann.entries[i - 1].image_id)
            throw Error(ErrorCode::InvalidArgument, "duplicate image_id " + std::to_string(ann.entries[i].image_id));
}

AnnotationSet read_annotations_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open annotations file " + path);
    AnnotationSet ann;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json j = json::parse(line);
            AnnotationEntry e;
            e.image_id = j.at("image_id").get<std::uint64_t>();
            e.categories = j.at("categories").get<std::vector<std::uint32_t>>();
            ann.entries.push_back(std::move(e));
        } catch (const json::exception& ex) {
            throw Error(ErrorCode::Parse, path + ":" + std::to_string(line_no) + ": " + ex.what());
        }
    }
    validate(ann);
    return ann;
}

void write_annotations_jsonl(const AnnotationSet& ann, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write annotations file " + path);
    for (const auto& e : ann.entries) {
        ordered_json j;
        j["image_id"] = e.image_id;
        j["categories"] = e.categories;
        out << j.dump() << '\n';
    }
    if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

// ---- concept index ----------------------------------------------------------

ConceptIndex::ConceptIndex(const AnnotationSet& ann, std::span<const std::uint64_t> image_ids)
    : images_(image_ids.begin(), image_ids.end()) {
    std::sort(images_.begin(), images_.end());
    for (std::uint64_t id : images_) {
        const AnnotationEntry* e = ann.find(id);
        if (e == nullptr) throw Error(ErrorCode::InvalidArgument, "image " + std::to_string(id) + " is not annotated");
        for (std::uint32_t c : e->categories) postings_[c].push_back(id);
    }
}

ConceptIndex::ConceptIndex(const AnnotationSet& ann) {
    images_.reserve(ann.entries.size());
    for (const auto& e : ann.entries) {
        images_.push_back(e.image_id);
        for (std::uint32_t c : e.categories) postings_[c].push_back(e.image_id);
    }
    std::sort(images_.begin(), images_.end());
    for (auto& [c, list] : postings_) std::sort(list.begin(), list.end());
}

std::span<const std::uint64_t> ConceptIndex::images_with(std::uint32_t concept_id) const {
    auto it = postings_.find(concept_id);
    if (it == postings_.end()) return {};
    return it->second;
}

std::vector<std::uint64_t> ConceptIndex::images_with_all(std::span<const std::uint32_t> concepts) const {
    if (concepts.empty()) return images_;
    std::vector<std::span<const std::uint64_t>> lists;
    for (std::uint32_t c : concepts) lists.push_back(images_with(c));
    std::sort(lists.begin(), lists.end(), [](auto a, auto b) { return a.size() < b.size(); });
    std::vector<std::uint64_t> acc(lists[0].begin(), lists[0].end());
    for (std::size_t i = 1; i < lists.size() && !acc.empty(); ++i) {
        std::vector<std::uint64_t> next;
        std::set_intersection(acc.begin(), acc.end(), lists[i].begin(), lists[i].end(), std::back_inserter(next));
        acc.swap(next);
    }
    return acc;
}

std::size_t ConceptIndex::count_with_all(std::span<const std::uint32_t> concepts) const {
    return images_with_all(concepts).size();
}

// ---- splits and compositions ------------------------------------------------

Splits split_images(const AnnotationSet& ann, std::uint64_t seed) {
    const std::size_t n = ann.entries.size();
    if (n < 6) throw Error(ErrorCode::TooFewImages, "need at least 6 images to split 4:1:1, got " + std::to_string(n));
    std::vector<std::uint64_t> ids;
    ids.reserve(n);
    for (const auto& e : ann.entries) ids.push_back(e.image_id);
    std::sort(ids.begin(), ids.end());
    Rng rng(stream_key({seed, 0x5b117}));
    rng.shuffle(ids);

    const auto sixth = static_cast<std::size_t>(std::llround(static_cast<double>(n) / 6.0));
    const std::size_t n_val = sixth, n_test = sixth, n_train = n - n_val - n_test;
    Splits s;
    s.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.val.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train),
                 ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    s.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), ids.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.val.begin(), s.val.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

namespace {

struct SplitCounter {
    ConceptIndex train, val, test;
    Thresholds thresholds;
    std::map<ConceptTuple, bool> memo;

    SplitCounter(const AnnotationSet& ann, const Splits& s, Thresholds t)
        : train(ann, s.train), val(ann, s.val), test(ann, s.test), thresholds(t) {}

    bool valid(const ConceptTuple& tuple) {
        auto it = memo.find(tuple);
        if (it != memo.end()) return it->second;
        const bool ok = train.count_with_all(tuple) >= thresholds.train &&
                        val.count_with_all(tuple) >= thresholds.val &&
                        test.count_with_all(tuple) >= thresholds.test;
        memo.emplace(tuple, ok);
        return ok;
    }
};

ConceptTuple sample_tuple(std::span<const std::uint32_t> universe, std::size_t k, Rng& rng) {
    std::vector<std::uint32_t> pool(universe.begin(), universe.end());
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    ConceptTuple t(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(t.begin(), t.end());
    return t;
}

void check_thresholds(Thresholds t) {
    if (t.train < 1 || t.val < 1 || t.test < 1)
        throw Error(ErrorCode::InvalidArgument, "split thresholds must be >= 1");
}

std::vector<ConceptTuple> run_algorithm_a(SplitCounter& counter, std::span<const std::uint32_t> universe,
                                          std::size_t k, std::size_t target_count, std::uint64_t seed,
                                          std::size_t max_attempts, const std::set<ConceptTuple>& exclude) {
    std::vector<ConceptTuple> out;
    if (target_count == 0) return out;
    if (k == 0 || universe.size() < k)
        throw Error(ErrorCode::ExhaustedSearch, "fewer than k=" + std::to_string(k) + " categories available");
    Rng rng(seed);
    std::set<ConceptTuple> accepted;
    std::size_t attempts = 0;
    while (out.size() < target_count) {
        if (attempts >= max_attempts)
            throw Error(ErrorCode::ExhaustedSearch, "found " + std::to_string(out.size()) + " of " +
                                                        std::to_string(target_count) + " compositions after " +
                                                        std::to_string(attempts) + " samples");
        ++attempts;
        ConceptTuple t = sample_tuple(universe, k, rng);
        if (exclude.count(t) != 0) continue;
        if (counter.valid(t) && accepted.insert(t).second) out.push_back(std::move(t));
    }
    return out;
}

}  // namespace

std::vector<ConceptTuple> generate_compositions(const AnnotationSet& ann, const Splits& splits, std::size_t k,
                                                std::size_t target_count, Thresholds thresholds,
                                                std::uint64_t seed, std::size_t max_attempts) {
    check_thresholds(thresholds);
    SplitCounter counter(ann, splits, thresholds);
    const auto universe = ann.categories();
    return run_algorithm_a(counter, universe, k, target_count, stream_key({seed, 0xa160, k}), max_attempts, {});
}

UnseenSetup generate_unseen_setup(const AnnotationSet& ann, const Splits& splits, std::uint64_t seed,
                                  std::size_t num_train, std::size_t num_test, Thresholds thresholds,
                                  std::size_t max_attempts) {
    check_thresholds(thresholds);
    SplitCounter counter(ann, splits, thresholds);
    const auto universe = ann.categories();
    UnseenSetup u;
    u.train_pairs = run_algorithm_a(counter, universe, 2, num_train, stream_key({seed, 0x0115ee, 1}), max_attempts, {});

    // Test pairs are drawn from the categories used by training pairs only,
    // so every test concept has been seen in some training composition.
    std::set<std::uint32_t> train_concepts;
    for (const auto& p : u.train_pairs) train_concepts.insert(p.begin(), p.end());
    const std::vector<std::uint32_t> seen(train_concepts.begin(), train_concepts.end());
    const std::set<ConceptTuple> exclude(u.train_pairs.begin(), u.train_pairs.end());
    u.test_pairs = run_algorithm_a(counter, seen, 2, num_test, stream_key({seed, 0x0115ee, 2}), max_attempts, exclude);
    return u;
}

std::size_t cooccurrence(const AnnotationSet& ann, std::span<const std::uint32_t> tuple) {
    std::size_t n = 0;
    for (const auto& e : ann.entries)
        if (std::includes(e.categories.begin(), e.categories.end(), tuple.begin(), tuple.end())) ++n;
    return n;
}

FeasibilitySets generate_feasibility_sets(const AnnotationSet& ann, const Splits& splits, std::uint64_t seed,
                                          std::size_t num_seen, std::size_t num_unseen, std::size_t num_infeasible,
                                          Thresholds thresholds, std::size_t max_attempts) {
    check_thresholds(thresholds);
    SplitCounter counter(ann, splits, thresholds);
    const auto universe = ann.categories();
    FeasibilitySets f;
    f.feasible_seen = run_algorithm_a(counter, universe, 2, num_seen, stream_key({seed, 0xfea5, 0}), max_attempts, {});

    const ConceptIndex all(ann);
    const std::set<ConceptTuple> base(f.feasible_seen.begin(), f.feasible_seen.end());
    auto draw = [&](std::size_t count, bool want_cooccurring, std::uint64_t tag) {
        std::vector<ConceptTuple> out;
        if (count == 0) return out;
        if (universe.size() < 2) throw Error(ErrorCode::ExhaustedSearch, "fewer than 2 categories available");
        Rng rng(stream_key({seed, 0xfea5, tag}));
        std::set<ConceptTuple> taken;
        std::size_t attempts = 0;
        while (out.size() < count) {
            if (attempts++ >= max_attempts)
                throw Error(ErrorCode::ExhaustedSearch,
                            std::string(want_cooccurring ? "feasible-unseen" : "infeasible") + " pairs: found " +
                                std::to_string(out.size()) + " of " + std::to_string(count));
            ConceptTuple t = sample_tuple(universe, 2, rng);
            if (base.count(t) != 0 || taken.count(t) != 0) continue;
            const bool cooccurs = all.count_with_all(t) > 0;
            if (cooccurs != want_cooccurring) continue;
            taken.insert(t);
            out.push_back(std::move(t));
        }
        return out;
    };
    f.feasible_unseen = draw(num_unseen, true, 1);
    f.infeasible = draw(num_infeasible, false, 2);
    return f;
}

std::vector<Query> generate_queries(std::span<const ConceptTuple> compositions, std::size_t k,
                                    std::size_t num_queries, std::uint64_t seed) {
    std::vector<Query> out;
    if (num_queries == 0) return out;
    if (compositions.empty()) throw Error(ErrorCode::InvalidArgument, "no compositions to draw queries from");
    for (const auto& c : compositions)
        if (c.size() != k)
            throw Error(ErrorCode::InvalidArgument, "composition arity " + std::to_string(c.size()) +
                                                        " does not match k=" + std::to_string(k));
    Rng rng(stream_key({seed, 0x9e7}));
    out.reserve(num_queries);
    for (std::size_t q = 0; q < num_queries; ++q) {
        const ConceptTuple& c = compositions[rng.below(compositions.size())];
        Query query;
        query.truth = c;
        for (std::uint32_t concept_id : c)
            query.set.items.push_back({concept_id, rng.coin() ? Modality::Text : Modality::Image});
        out.push_back(std::move(query));
    }
    return out;
}

// ---- benchmark JSON ---------------------------------------------------------

std::string benchmark_to_json(const CompositionBenchmark& b) {
    ordered_json j;
    j["k"] = b.k;
    j["seed"] = b.seed;
    j["splits"] = {{"train", b.splits.train}, {"val", b.splits.val}, {"test", b.splits.test}};
    j["compositions"] = b.compositions;
    if (b.unseen)
        j["unseen"] = {{"train_pairs", b.unseen->train_pairs}, {"test_pairs", b.unseen->test_pairs}};
    else
        j["unseen"] = nullptr;
    if (b.feasibility)
        j["feasibility"] = {{"feasible_seen", b.feasibility->feasible_seen},
                            {"feasible_unseen", b.feasibility->feasible_unseen},
                            {"infeasible", b.feasibility->infeasible}};
    else
        j["feasibility"] = nullptr;
    j["config"] = {{"num_compositions", b.compositions.size()},
                   {"thresholds", {b.thresholds.train, b.thresholds.val, b.thresholds.test}},
                   {"max_attempts", b.max_attempts}};
    return j.dump(2) + "\n";
}

CompositionBenchmark benchmark_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        CompositionBenchmark b;
        b.k = j.at("k").get<std::size_t>();
        b.seed = j.at("seed").get<std::uint64_t>();
        b.splits.train = j.at("splits").at("train").get<std::vector<std::uint64_t>>();
        b.splits.val = j.at("splits").at("val").get<std::vector<std::uint64_t>>();
        b.splits.test = j.at("splits").at("test").get<std::vector<std::uint64_t>>();
        b.compositions = j.at("compositions").get<std::vector<ConceptTuple>>();
        if (j.contains("unseen") && !j["unseen"].is_null())
            b.unseen = UnseenSetup{j["unseen"].at("train_pairs").get<std::vector<ConceptTuple>>(),
                                   j["unseen"].at("test_pairs").get<std::vector<ConceptTuple>>()};
        if (j.contains("feasibility") && !j["feasibility"].is_null())
            b.feasibility = FeasibilitySets{j["feasibility"].at("feasible_seen").get<std::vector<ConceptTuple>>(),
                                            j["feasibility"].at("feasible_unseen").get<std::vector<ConceptTuple>>(),
                                            j["feasibility"].at("infeasible").get<std::vector<ConceptTuple>>()};
        if (j.contains("config")) {
            const auto& c = j["config"];
            if (c.contains("thresholds")) {
                const auto t = c["thresholds"].get<std::vector<std::size_t>>();
                if (t.size() == 3) b.thresholds = {t[0], t[1], t[2]};
            }
            if (c.contains("max_attempts")) b.max_attempts = c["max_attempts"].get<std::size_t>();
        }
        return b;
    } catch (const json::exception& ex) {
        throw Error(ErrorCode::Parse, std::string("benchmark JSON: ") + ex.what());
    }
}

void write_benchmark(const CompositionBenchmark& b, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write benchmark " + path);
    out << benchmark_to_json(b);
    if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

CompositionBenchmark read_benchmark(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open benchmark " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return benchmark_from_json(ss.str());
}

}  // namespace mpc
