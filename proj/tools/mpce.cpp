// mpce: command-line front end for the probabilistic composition engine.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mpc/bench_sim.hpp"
#include "mpc/benchgen.hpp"
#include "mpc/binary_io.hpp"
#include "mpc/checkpoint.hpp"
#include "mpc/error.hpp"
#include "mpc/feasibility.hpp"
#include "mpc/gradcheck.hpp"
#include "mpc/rng.hpp"
#include "mpc/retrieval.hpp"
#include "mpc/synth_world.hpp"
#include "mpc/training.hpp"

using namespace mpc;
using nlohmann::ordered_json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitExhausted = 4;
constexpr int kExitDims = 5;
constexpr int kExitSpec = 6;
constexpr int kExitGradient = 7;

// Thrown for problems that map straight to an exit code.
struct ExitError : std::runtime_error {
    int code;
    ExitError(int c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

int exit_code_for(ErrorCode c) {
    switch (c) {
        case ErrorCode::Io:
        case ErrorCode::BadMagic:
        case ErrorCode::VersionMismatch:
        case ErrorCode::TruncatedFile: return kExitIo;
        case ErrorCode::ExhaustedSearch: return kExitExhausted;
        case ErrorCode::DimensionMismatch:
        case ErrorCode::ShapeMismatch: return kExitDims;
        case ErrorCode::ConfigInfeasible:
        case ErrorCode::InvalidArgument:
        case ErrorCode::Parse:
        case ErrorCode::TooFewImages:
        case ErrorCode::UnsupportedArity: return kExitConfig;
        default: return 1;
    }
}

void write_text(const std::string& path, const std::string& text) { binary::write_file(path, text); }

ordered_json report_json(const EvalReport& r) {
    ordered_json j;
    ordered_json rec = ordered_json::object();
    for (const auto& [k, v] : r.recall_at) rec[std::to_string(k)] = v;
    j["recall_at"] = rec;
    j["r_precision"] = r.r_precision;
    j["num_queries"] = r.num_queries;
    return j;
}

std::vector<std::size_t> parse_list(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t pos = 0;
            const unsigned long v = std::stoul(item, &pos);
            if (pos != item.size()) throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::exception&) {
            throw ExitError(kExitConfig, "invalid integer list '" + s + "'");
        }
    }
    if (out.empty()) throw ExitError(kExitConfig, "empty integer list");
    return out;
}

// "img:<image_id>" / "txt:<concept_id>", comma separated.
struct SpecItem {
    bool image = false;
    std::uint64_t value = 0;
};

std::vector<SpecItem> parse_spec(const std::string& spec) {
    std::vector<SpecItem> out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        const std::string kind = item.substr(0, colon);
        const std::string num = colon == std::string::npos ? "" : item.substr(colon + 1);
        if ((kind != "img" && kind != "txt") || num.empty() || num.find_first_not_of("0123456789") != std::string::npos)
            throw ExitError(kExitSpec, "malformed query item '" + item + "' (expected img:<id> or txt:<concept>)");
        try {
            out.push_back({kind == "img", std::stoull(num)});
        } catch (const std::exception&) {
            throw ExitError(kExitSpec, "query item out of range '" + item + "'");
        }
    }
    if (out.empty() || spec.back() == ',') throw ExitError(kExitSpec, "malformed query SPEC '" + spec + "'");
    return out;
}

const FusionParams* fusion_for(ComposerKind composer, const ModelParams& model) {
    if (composer != ComposerKind::Mlp) return nullptr;
    if (!model.fusion) throw ExitError(kExitConfig, "composer mlp requires a checkpoint trained with fusion weights");
    return &*model.fusion;
}

void check_dims(const ModelParams& model, const TokenProvider& data) {
    if (model.feature_dim() != data.feature_dim())
        throw ExitError(kExitDims, "model expects " + std::to_string(model.feature_dim()) + "-dim tokens but data has " +
                                       std::to_string(data.feature_dim()));
}

std::vector<ConceptTuple> query_compositions(const CompositionBenchmark& b, const std::string& set) {
    if (set == "seen") return b.compositions;
    if (set == "unseen") {
        if (!b.unseen) throw ExitError(kExitConfig, "benchmark has no unseen setup (regenerate with --unseen)");
        return b.unseen->test_pairs;
    }
    if (set == "unseen-train") {
        if (!b.unseen) throw ExitError(kExitConfig, "benchmark has no unseen setup (regenerate with --unseen)");
        return b.unseen->train_pairs;
    }
    throw ExitError(kExitConfig, "unknown composition set '" + set + "'");
}

// ---- commands ---------------------------------------------------------------

struct GenSynthArgs {
    std::string config, out;
};

int run_gen_synth(const GenSynthArgs& a) {
    const SynthWorldConfig cfg = synth_config_from_json(binary::read_file(a.config));
    const SynthWorld world = SynthWorld::generate(cfg);
    world.write_to_dir(a.out);
    std::cout << "wrote " << world.annotations().entries.size() << " images, " << cfg.num_concepts << " concepts to "
              << a.out << "\n";
    return 0;
}

struct GenBenchArgs {
    std::string annotations, out;
    std::size_t k = 2, num = 0, max_attempts = kDefaultMaxAttempts;
    std::uint64_t seed = 0;
    bool unseen = false, feasibility = false;
    std::size_t unseen_train = 100, unseen_test = 500, feasible_unseen = 250, infeasible = 250;
};

int run_gen_bench(const GenBenchArgs& a) {
    AnnotationSet ann = read_annotations_jsonl(a.annotations);
    CompositionBenchmark b;
    b.k = a.k;
    b.seed = a.seed;
    b.max_attempts = a.max_attempts;
    b.splits = split_images(ann, a.seed);
    if (a.feasibility) {
        if (a.k != 2) throw ExitError(kExitConfig, "feasibility sets are defined for pairs (k=2)");
        b.feasibility = generate_feasibility_sets(ann, b.splits, a.seed, a.num, a.feasible_unseen, a.infeasible,
                                                  b.thresholds, a.max_attempts);
        b.compositions = b.feasibility->feasible_seen;
    } else {
        b.compositions = generate_compositions(ann, b.splits, a.k, a.num, b.thresholds, a.seed, a.max_attempts);
    }
    if (a.unseen) {
        if (a.k != 2) throw ExitError(kExitConfig, "the unseen setup is defined for pairs (k=2)");
        b.unseen = generate_unseen_setup(ann, b.splits, a.seed, a.unseen_train, a.unseen_test, b.thresholds,
                                         a.max_attempts);
    }
    write_benchmark(b, a.out);
    std::cout << "wrote " << b.compositions.size() << " compositions to " << a.out << "\n";
    return 0;
}

struct TrainArgs {
    std::string data, bench, config, out, resume, loss_csv, set = "seen";
    std::optional<std::size_t> steps;
    bool quiet = false;
};

int run_train(const TrainArgs& a) {
    TrainConfig cfg = train_config_from_json(binary::read_file(a.config));
    if (a.steps) cfg.steps = *a.steps;
    const DirectoryTokenProvider data(a.data);
    const CompositionBenchmark bench = read_benchmark(a.bench);
    const BatchSampler sampler(data, bench.splits.train, query_compositions(bench, a.set));

    const std::size_t log_every = std::max<std::size_t>(1, cfg.steps / 20);
    auto on_step = [&](std::size_t s, const LossBreakdown& lb) {
        if (!a.quiet && (s % log_every == 0 || s == cfg.steps))
            std::cerr << "step " << s << " loss " << lb.total << " (contrastive " << lb.contrastive << ", reg "
                      << lb.regularizer << ")\n";
    };
    TrainResult r;
    if (a.resume.empty()) {
        r = train_loop(sampler, cfg, on_step);
    } else {
        Checkpoint ck = read_checkpoint(a.resume);
        check_dims(ck.model, data);
        if (ck.adam.m.empty()) ck.adam = init_adam(ck.model);
        r = train_loop(sampler, cfg, std::move(ck.model), std::move(ck.adam), on_step);
    }
    write_checkpoint({r.model, r.adam}, a.out);

    std::ostringstream csv;
    csv.precision(17);
    csv << "step,loss\n";
    for (std::size_t s = 0; s < r.losses.size(); ++s) csv << s << ',' << r.losses[s] << '\n';
    write_text(a.loss_csv.empty() ? a.out + ".loss.csv" : a.loss_csv, csv.str());
    write_text(a.out + ".config.json", train_config_to_json(cfg) + "\n");
    std::cout << "final loss " << r.losses.back() << "\n";
    return 0;
}

struct EvalArgs {
    std::string model, bench, data, report, gallery, set = "seen";
    std::size_t k_queries = 2, num_queries = 1000, threads = 1;
    std::string modalities = "mixed", composer = "product";
    std::uint64_t seed = 0;
    bool oracle_stub = false;
};

int run_eval(const EvalArgs& a) {
    const CompositionBenchmark bench = read_benchmark(a.bench);
    const DirectoryTokenProvider data(a.data);
    const ComposerKind composer = parse_composer(a.composer);
    const ModalityMix mix = parse_modality_mix(a.modalities);
    const auto comps = query_compositions(bench, a.set);
    if (comps.empty() || comps.front().size() != a.k_queries)
        throw ExitError(kExitConfig, "benchmark set '" + a.set + "' has no compositions of arity " +
                                         std::to_string(a.k_queries));
    std::vector<Query> queries = generate_queries(comps, a.k_queries, a.num_queries, a.seed);
    apply_modality_mix(queries, mix);

    EvalReport rep;
    std::size_t gallery_size = 0;
    if (a.oracle_stub) {
        const auto universe = data.annotations().categories();
        const std::size_t dim = universe.empty() ? 1 : universe.back() + 1;
        const Gallery g = build_oracle_gallery(data.annotations(), bench.splits.test, dim);
        gallery_size = g.size();
        rep = eval_run(ConceptOracleEncoder(dim), queries, g, composer, nullptr, {}, a.threads);
    } else {
        if (a.model.empty()) throw ExitError(kExitConfig, "--model is required unless --oracle-stub is given");
        const Checkpoint ck = read_checkpoint(a.model);
        check_dims(ck.model, data);
        const Gallery g = a.gallery.empty() ? build_gallery(ck.model, data, bench.splits.test) : read_gallery(a.gallery);
        if (g.dim() != ck.model.embed_dim())
            throw ExitError(kExitDims, "gallery dimension does not match the model embedding dimension");
        gallery_size = g.size();
        const ModelQueryEncoder enc(ck.model, data, bench.splits.test, a.seed);
        rep = eval_run(enc, queries, g, composer, fusion_for(composer, ck.model), {}, a.threads);
    }

    ordered_json j = report_json(rep);
    j["config"] = {{"model", a.model},
                   {"bench", a.bench},
                   {"data", a.data},
                   {"gallery", a.gallery},
                   {"gallery_size", gallery_size},
                   {"set", a.set},
                   {"k_queries", a.k_queries},
                   {"num_queries", a.num_queries},
                   {"modalities", std::string(to_string(mix))},
                   {"composer", std::string(to_string(composer))},
                   {"seed", a.seed},
                   {"threads", a.threads},
                   {"oracle_stub", a.oracle_stub}};
    const std::string text = j.dump(2) + "\n";
    if (a.report.empty()) std::cout << text;
    else write_text(a.report, text);
    std::cerr << "R@1 " << rep.recall_at[1] << "  R@5 " << rep.recall_at[5] << "  R@10 " << rep.recall_at[10]
              << "  R-P " << rep.r_precision << "\n";
    return 0;
}

struct EmbedGalleryArgs {
    std::string model, data, bench, out, split = "test";
};

int run_embed_gallery(const EmbedGalleryArgs& a) {
    const Checkpoint ck = read_checkpoint(a.model);
    const DirectoryTokenProvider data(a.data);
    check_dims(ck.model, data);
    std::vector<std::uint64_t> ids;
    if (a.bench.empty()) {
        for (const auto& e : data.annotations().entries) ids.push_back(e.image_id);
    } else {
        const CompositionBenchmark b = read_benchmark(a.bench);
        if (a.split == "train") ids = b.splits.train;
        else if (a.split == "val") ids = b.splits.val;
        else if (a.split == "test") ids = b.splits.test;
        else throw ExitError(kExitConfig, "unknown split '" + a.split + "'");
    }
    const Gallery g = build_gallery(ck.model, data, ids);
    write_gallery(g, a.out);
    std::cout << "wrote " << g.size() << " records to " << a.out << "\n";
    return 0;
}

struct RetrieveArgs {
    std::string model, gallery, query, data, composer = "product";
    std::size_t topk = 10, threads = 1;
};

int run_retrieve(const RetrieveArgs& a) {
    const auto spec = parse_spec(a.query);
    const Checkpoint ck = read_checkpoint(a.model);
    const Gallery g = read_gallery(a.gallery);
    if (g.dim() != ck.model.embed_dim())
        throw ExitError(kExitDims, "gallery dimension does not match the model embedding dimension");
    std::unique_ptr<DirectoryTokenProvider> data;
    std::vector<ProbEmbedding> items;
    for (const auto& it : spec) {
        if (it.image) {
            if (a.data.empty()) throw ExitError(kExitConfig, "img: items need --data");
            if (!data) {
                data = std::make_unique<DirectoryTokenProvider>(a.data);
                check_dims(ck.model, *data);
            }
            items.push_back(embed_head(data->image(it.value), ck.model.image_head));
        } else {
            if (!data && !a.data.empty()) {
                data = std::make_unique<DirectoryTokenProvider>(a.data);
                check_dims(ck.model, *data);
            }
            if (!data) throw ExitError(kExitConfig, "txt: items need --data for the text token source");
            items.push_back(embed_head(data->text(static_cast<std::uint32_t>(it.value), 0), ck.model.text_head));
        }
    }
    const ComposerKind composer = parse_composer(a.composer);
    const CompositeGaussian c = compose(composer, items, fusion_for(composer, ck.model));
    const auto ranked = top_k(c, g, a.topk, a.threads);
    for (std::size_t r = 0; r < ranked.size(); ++r)
        std::printf("%zu\t%llu\t%.9f\n", r + 1, static_cast<unsigned long long>(ranked[r].id), ranked[r].score);
    return 0;
}

struct FeasibilityArgs {
    std::string model, bench, data, roc, method = "neg_log_z", composer = "product", modalities = "mixed";
    std::uint64_t seed = 0;
    std::uint32_t j_samples = 7;
};

int run_feasibility(const FeasibilityArgs& a) {
    const CompositionBenchmark bench = read_benchmark(a.bench);
    if (!bench.feasibility) throw ExitError(kExitConfig, "benchmark has no feasibility sets (regenerate with --feasibility)");
    const DirectoryTokenProvider data(a.data);
    const Checkpoint ck = read_checkpoint(a.model);
    check_dims(ck.model, data);
    const ComposerKind composer = parse_composer(a.composer);
    const UncertaintyMethod method = parse_uncertainty(a.method);
    const ModalityMix mix = parse_modality_mix(a.modalities);

    std::vector<std::uint64_t> pool;
    for (const auto& e : data.annotations().entries) pool.push_back(e.image_id);
    const ModelQueryEncoder enc(ck.model, data, pool, a.seed);
    const auto feasible = feasibility_query_sets(bench.feasibility->feasible_unseen, mix, stream_key({a.seed, 0}));
    const auto infeasible = feasibility_query_sets(bench.feasibility->infeasible, mix, stream_key({a.seed, 1}));
    const SimConfig sc{a.j_samples, a.seed};
    const FeasibilityReport rep =
        feasibility_eval(enc, feasible, infeasible, composer, fusion_for(composer, ck.model), method, sc);
    if (!a.roc.empty()) write_text(a.roc, roc_to_csv(rep.roc));
    ordered_json j;
    j["auc"] = rep.roc.auc;
    j["num_feasible"] = feasible.size();
    j["num_infeasible"] = infeasible.size();
    j["config"] = {{"model", a.model},         {"bench", a.bench},     {"data", a.data},
                   {"method", a.method},       {"composer", a.composer}, {"modalities", a.modalities},
                   {"j_samples", a.j_samples}, {"seed", a.seed},       {"roc", a.roc}};
    std::cout << j.dump(2) << "\n";
    return 0;
}

int run_check_grad(std::uint64_t seed) {
    const auto reports = check_all_gradients(seed);
    bool ok = true;
    for (const auto& r : reports) {
        std::printf("%s/%s k=%zu\n", std::string(to_string(r.composer)).c_str(),
                    std::string(to_string(r.similarity)).c_str(), r.arity);
        for (const auto& g : r.groups) {
            const bool pass = g.max_rel_error <= 1e-4;
            ok = ok && pass;
            std::printf("  %-16s %.3e%s\n", g.group.c_str(), g.max_rel_error, pass ? "" : "  FAIL");
        }
    }
    std::printf("%s\n", ok ? "gradient check passed" : "gradient check FAILED");
    return ok ? 0 : kExitGradient;
}

struct BenchSimArgs {
    std::string j = "8,16,32,64,128";
    std::size_t dim = 64;
    bool with_sampling = false;
};

int run_bench_sim(const BenchSimArgs& a) {
    const auto js = parse_list(a.j);
    SimBenchConfig cfg;
    cfg.dim = a.dim;
    cfg.include_sampling = a.with_sampling;
    const auto timings = bench_similarities(js, cfg);
    std::vector<double> x, ym, yp;
    std::printf("J\tmpc_us\tpairwise_us\n");
    for (const auto& t : timings) {
        std::printf("%zu\t%.4f\t%.4f\n", t.j, t.mpc_seconds * 1e6, t.pairwise_seconds * 1e6);
        x.push_back(static_cast<double>(t.j));
        ym.push_back(t.mpc_seconds);
        yp.push_back(t.pairwise_seconds);
    }
    auto fmt = [](std::optional<double> s) {
        if (!s) return std::string("n/a");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3f", *s);
        return std::string(buf);
    };
    std::printf("slope(mpc)=%s\nslope(pairwise)=%s\n", fmt(loglog_slope(x, ym)).c_str(), fmt(loglog_slope(x, yp)).c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Probabilistic compositional embeddings: generation, training, retrieval and evaluation"};
    app.require_subcommand(1);

    GenSynthArgs gs;
    auto* c_gs = app.add_subcommand("gen-synth", "Generate a synthetic concept world");
    c_gs->add_option("--config", gs.config, "World config JSON")->required();
    c_gs->add_option("--out", gs.out, "Output directory")->required();

    GenBenchArgs gb;
    auto* c_gb = app.add_subcommand("gen-bench", "Generate a composition benchmark from annotations");
    c_gb->add_option("--annotations", gb.annotations, "annotations.jsonl")->required();
    c_gb->add_option("--k", gb.k, "Concepts per composition")->required();
    c_gb->add_option("--num", gb.num, "Number of compositions")->required();
    c_gb->add_option("--seed", gb.seed, "Random seed")->required();
    c_gb->add_option("--out", gb.out, "Benchmark JSON path")->required();
    c_gb->add_flag("--unseen", gb.unseen, "Also emit the unseen-composition setup");
    c_gb->add_flag("--feasibility", gb.feasibility, "Emit feasibility sets; compositions become the seen base");
    c_gb->add_option("--unseen-train", gb.unseen_train, "Unseen setup: training pairs")->capture_default_str();
    c_gb->add_option("--unseen-test", gb.unseen_test, "Unseen setup: test pairs")->capture_default_str();
    c_gb->add_option("--feasible-unseen", gb.feasible_unseen, "Feasible unseen pairs")->capture_default_str();
    c_gb->add_option("--infeasible", gb.infeasible, "Infeasible pairs")->capture_default_str();
    c_gb->add_option("--max-attempts", gb.max_attempts, "Sampler attempt budget")->capture_default_str();

    TrainArgs tr;
    auto* c_tr = app.add_subcommand("train", "Train the embedding heads");
    c_tr->add_option("--data", tr.data, "Data directory")->required();
    c_tr->add_option("--bench", tr.bench, "Benchmark JSON")->required();
    c_tr->add_option("--config", tr.config, "Training config JSON")->required();
    c_tr->add_option("--out", tr.out, "Checkpoint path")->required();
    c_tr->add_option("--resume", tr.resume, "Continue from this checkpoint");
    c_tr->add_option("--loss-csv", tr.loss_csv, "Loss trace path (default <out>.loss.csv)");
    c_tr->add_option("--steps", tr.steps, "Override the configured step count");
    c_tr->add_option("--set", tr.set, "Training compositions: seen or unseen-train")->capture_default_str();
    c_tr->add_flag("--quiet", tr.quiet, "No progress output");

    EvalArgs ev;
    auto* c_ev = app.add_subcommand("eval", "Evaluate retrieval on benchmark queries");
    c_ev->add_option("--model", ev.model, "Checkpoint");
    c_ev->add_option("--bench", ev.bench, "Benchmark JSON")->required();
    c_ev->add_option("--data", ev.data, "Data directory")->required();
    c_ev->add_option("--k-queries", ev.k_queries, "Items per query")->required();
    c_ev->add_option("--modalities", ev.modalities, "image, text or mixed")->capture_default_str();
    c_ev->add_option("--composer", ev.composer, "product, addition or mlp")->capture_default_str();
    c_ev->add_option("--report", ev.report, "Report JSON path (stdout if omitted)");
    c_ev->add_option("--gallery", ev.gallery, "Precomputed MPCE gallery (default: embed the test split)");
    c_ev->add_option("--set", ev.set, "Query compositions: seen, unseen or unseen-train")->capture_default_str();
    c_ev->add_option("--num-queries", ev.num_queries, "Number of queries")->capture_default_str();
    c_ev->add_option("--seed", ev.seed, "Query seed")->capture_default_str();
    c_ev->add_option("--threads", ev.threads, "Scoring threads")->capture_default_str();
    c_ev->add_flag("--oracle-stub", ev.oracle_stub, "Test hook: concept-indicator embeddings instead of a model");

    EmbedGalleryArgs eg;
    auto* c_eg = app.add_subcommand("embed-gallery", "Embed images into an MPCE gallery file");
    c_eg->add_option("--model", eg.model, "Checkpoint")->required();
    c_eg->add_option("--data", eg.data, "Data directory")->required();
    c_eg->add_option("--bench", eg.bench, "Benchmark JSON (all images if omitted)");
    c_eg->add_option("--split", eg.split, "train, val or test")->capture_default_str();
    c_eg->add_option("--out", eg.out, "Gallery path")->required();

    RetrieveArgs rt;
    auto* c_rt = app.add_subcommand("retrieve", "Top-k retrieval for one composite query");
    c_rt->add_option("--model", rt.model, "Checkpoint")->required();
    c_rt->add_option("--gallery", rt.gallery, "MPCE gallery")->required();
    c_rt->add_option("--query", rt.query, "img:<image_id> / txt:<concept_id>, comma separated")->required();
    c_rt->add_option("--topk", rt.topk, "Results to print")->capture_default_str();
    c_rt->add_option("--data", rt.data, "Data directory for token lookup");
    c_rt->add_option("--composer", rt.composer, "product, addition or mlp")->capture_default_str();
    c_rt->add_option("--threads", rt.threads, "Scoring threads")->capture_default_str();

    FeasibilityArgs fe;
    auto* c_fe = app.add_subcommand("feasibility", "Score feasible-unseen vs infeasible pairs and report ROC/AUC");
    c_fe->add_option("--model", fe.model, "Checkpoint")->required();
    c_fe->add_option("--bench", fe.bench, "Benchmark JSON with feasibility sets")->required();
    c_fe->add_option("--data", fe.data, "Data directory")->required();
    c_fe->add_option("--method", fe.method, "neg_log_z, mc_self_sim or euclidean_means")->capture_default_str();
    c_fe->add_option("--composer", fe.composer, "product, addition or mlp")->capture_default_str();
    c_fe->add_option("--modalities", fe.modalities, "image, text or mixed")->capture_default_str();
    c_fe->add_option("--roc", fe.roc, "ROC CSV path");
    c_fe->add_option("--seed", fe.seed, "Seed")->capture_default_str();
    c_fe->add_option("--j", fe.j_samples, "Samples for mc_self_sim")->capture_default_str();

    std::uint64_t grad_seed = 0;
    auto* c_cg = app.add_subcommand("check-grad", "Compare analytic gradients with finite differences");
    c_cg->add_option("--seed", grad_seed, "Seed")->capture_default_str();

    BenchSimArgs bs;
    auto* c_bs = app.add_subcommand("bench-sim", "Time both similarities across sample counts");
    c_bs->add_option("--j", bs.j, "Comma-separated sample counts")->capture_default_str();
    c_bs->add_option("--dim", bs.dim, "Embedding dimension")->capture_default_str();
    c_bs->add_flag("--with-sampling", bs.with_sampling, "Include noise generation in the timed region");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (*c_gs) return run_gen_synth(gs);
        if (*c_gb) return run_gen_bench(gb);
        if (*c_tr) return run_train(tr);
        if (*c_ev) return run_eval(ev);
        if (*c_eg) return run_embed_gallery(eg);
        if (*c_rt) return run_retrieve(rt);
        if (*c_fe) return run_feasibility(fe);
        if (*c_cg) return run_check_grad(grad_seed);
        if (*c_bs) return run_bench_sim(bs);
    } catch (const ExitError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
