// facepipe: noisy face datasets in, curriculum-ordered training manifests out.
//
// Subcommands mirror the pipeline stages: clean -> augment -> generate ->
// screen -> order, plus synth-corpus for reproducible test fixtures.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <opencv2/core.hpp>

#include "facepipe/augmentor.hpp"
#include "facepipe/cleaner.hpp"
#include "facepipe/clients.hpp"
#include "facepipe/config.hpp"
#include "facepipe/curriculum.hpp"
#include "facepipe/embed_io.hpp"
#include "facepipe/errors.hpp"
#include "facepipe/generator.hpp"
#include "facepipe/json_io.hpp"
#include "facepipe/leakscreen.hpp"
#include "facepipe/synthcorpus.hpp"
#include "facepipe/util.hpp"

namespace fs = std::filesystem;
using namespace facepipe;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitContract = 2;
constexpr int kExitScreenFailed = 3;

PipelineConfig load_config_or_default(const std::string& path) {
    if (path.empty()) return PipelineConfig{};
    return load_pipeline_config(path);
}

fs::path default_embeddings(const std::string& root) {
    return fs::path(root) / "embeddings.emb1";
}

struct CleanArgs {
    std::string root, embeddings, out, config, llm_kind;
    unsigned threads = 0;
};

int cmd_clean(const CleanArgs& args) {
    PipelineConfig config = load_config_or_default(args.config);
    if (!args.llm_kind.empty()) config.llm.kind = args.llm_kind;
    {
        const auto violations = validate_config(config.clean);
        if (!violations.empty())
            throw ContractError("invalid cleaning config: " + violations.front());
    }

    ScanResult scan = scan_dataset(args.root);
    for (const std::string& name : scan.skipped)
        std::fprintf(stderr, "note: skipping non-conforming entry: %s\n", name.c_str());

    const fs::path emb_path =
        args.embeddings.empty() ? default_embeddings(args.root) : fs::path(args.embeddings);
    auto [matrix, index] = read_embeddings(emb_path, /*normalize=*/true);
    attach_embedding_rows(scan.records, index);

    std::unique_ptr<LlmGateway> gateway = make_llm_gateway(config.llm);
    CleanContext ctx;
    ctx.matrix = &matrix;
    ctx.config = config.clean;
    ctx.grid = config.grid;
    ctx.llm = gateway.get();
    ctx.llm_budget = config.llm.budget;
    ctx.image_root = args.root;

    CleanRun run = clean_corpus(ctx, scan.records, args.threads);
    write_reports(args.out, run);
    if (gateway) write_transcripts(args.out + ".llm.jsonl", run.transcripts);

    std::printf("identities: %zu\n", run.stats.identities);
    std::printf("kept: %zu\n", run.stats.kept_identities);
    std::printf("discarded: %zu\n", run.stats.discarded_identities);
    std::printf("images_removed: %zu\n", run.stats.images_removed);
    std::printf("mean_tau: %.6f\n", run.stats.mean_tau);
    std::printf("llm_consults: %zu\n", run.stats.llm_consults);

    if (!run.errors.empty()) {
        for (const std::string& err : run.errors)
            std::fprintf(stderr, "error: %s\n", err.c_str());
        return kExitContract;
    }
    return kExitOk;
}

struct AugmentArgs {
    std::string root, reports, config, ledger;
    std::uint64_t seed = 0;
};

int cmd_augment(const AugmentArgs& args) {
    const PipelineConfig config = load_config_or_default(args.config);
    const std::vector<CleanReport> reports = read_reports(args.reports);

    std::size_t generated = 0, quarantined = 0, augmented_ids = 0, discarded_ids = 0;
    std::string ledger_text;

    for (const CleanReport& rep : reports) {
        if (rep.verdict == Verdict::discarded) {
            discarded_ids += 1;
            continue;
        }
        const fs::path dir = fs::path(args.root) / rep.identity_id;
        if (!fs::is_directory(dir))
            throw IoError("identity directory missing: " + dir.string());

        // Flagged images move aside so the directory converges to exactly
        // the target count; reruns skip files that are already quarantined.
        const fs::path qdir = fs::path(args.root) / ".quarantine" / rep.identity_id;
        for (int idx : rep.removed) {
            const fs::path src = dir / rep.images.at(static_cast<std::size_t>(idx));
            const fs::path dst = qdir / rep.images.at(static_cast<std::size_t>(idx));
            if (fs::exists(src)) {
                fs::create_directories(qdir);
                fs::rename(src, dst);
                quarantined += 1;
            } else if (!fs::exists(dst)) {
                throw IoError("image flagged for removal no longer exists: " + src.string());
            }
        }

        std::vector<std::string> kept_files;
        for (int idx : rep.kept) kept_files.push_back(rep.images.at(static_cast<std::size_t>(idx)));
        const std::vector<AugmentRecipe> plan =
            plan_replenishment(kept_files, config.augment, args.seed, rep.identity_id);
        generated += execute_plan(args.root, rep.identity_id, plan);
        augmented_ids += 1;

        for (const AugmentRecipe& recipe : plan) {
            nlohmann::json line = recipe_to_json(recipe);
            line["identity_id"] = rep.identity_id;
            ledger_text += dump_canonical(line);
        }
    }

    const fs::path ledger_path = args.ledger.empty()
                                     ? fs::path(args.root) / "augment_ledger.jsonl"
                                     : fs::path(args.ledger);
    write_file_text(ledger_path, ledger_text);

    std::printf("identities_augmented: %zu\n", augmented_ids);
    std::printf("identities_discarded: %zu\n", discarded_ids);
    std::printf("generated: %zu\n", generated);
    std::printf("quarantined: %zu\n", quarantined);
    return kExitOk;
}

struct GenerateArgs {
    std::string out, config;
    std::size_t count = 0;
    std::uint64_t seed = 0;
};

int cmd_generate(const GenerateArgs& args) {
    const PipelineConfig config = load_config_or_default(args.config);
    auto generator = make_generator_client(config.generator);
    auto expander = make_expander_client(config.expander);
    auto detector = make_detector_client(config.detector);
    GenerateClients clients{generator.get(), expander.get(), detector.get()};

    const GenerateSummary summary =
        generate_corpus(clients, config, args.count, args.out, args.seed);
    std::printf("generated: %zu\n", summary.generated_ids.size());
    std::printf("skipped: %zu\n", summary.skipped);
    return kExitOk;
}

struct ScreenArgs {
    std::string root, embeddings, gallery, out, config;
    double tau = -1.0;
    unsigned threads = 0;
};

int cmd_screen(const ScreenArgs& args) {
    const PipelineConfig config = load_config_or_default(args.config);
    const double tau = args.tau >= 0.0 ? args.tau : config.leak.tau_leak;
    if (tau <= 0.0 || tau > 1.0) throw ContractError("tau_leak must be in (0, 1]");

    ScanResult scan = scan_dataset(args.root);
    const fs::path emb_path =
        args.embeddings.empty() ? default_embeddings(args.root) : fs::path(args.embeddings);
    auto [matrix, index] = read_embeddings(emb_path, /*normalize=*/true);
    attach_embedding_rows(scan.records, index);

    const GalleryIndex gallery = load_gallery(args.gallery);
    const ScreenRun run = screen_corpus(matrix, scan.records, gallery, tau, args.threads);

    const fs::path out_path = args.out.empty() ? fs::path(args.root) / "leak_verdicts.json"
                                               : fs::path(args.out);
    write_screen_run(out_path, run);

    std::printf("screened: %zu\n", run.verdicts.size());
    std::printf("passed: %zu\n", run.summary.n_passed);
    std::printf("failed: %zu\n", run.summary.n_failed);
    if (run.summary.n_failed > 0) {
        for (const std::string& id : run.summary.failed_ids)
            std::fprintf(stderr, "leak: identity %s matches the evaluation gallery\n",
                         id.c_str());
        return kExitScreenFailed;
    }
    return kExitOk;
}

struct OrderArgs {
    std::string root, reports, pool, out, config, embeddings, pool_embeddings;
    std::uint64_t seed = 0;
};

int cmd_order(const OrderArgs& args) {
    const PipelineConfig config = load_config_or_default(args.config);
    const std::size_t target = static_cast<std::size_t>(config.augment.target_count);
    const std::vector<CleanReport> reports = read_reports(args.reports);

    const fs::path emb_path =
        args.embeddings.empty() ? default_embeddings(args.root) : fs::path(args.embeddings);
    auto [matrix, index] = read_embeddings(emb_path, /*normalize=*/true);

    // Replacement pool: generated identities, each already at full size.
    ScanResult pool_scan = scan_dataset(args.pool);
    const fs::path pool_emb_path = args.pool_embeddings.empty()
                                       ? default_embeddings(args.pool)
                                       : fs::path(args.pool_embeddings);
    auto [pool_matrix, pool_index] = read_embeddings(pool_emb_path, /*normalize=*/true);
    attach_embedding_rows(pool_scan.records, pool_index);
    for (const IdentityRecord& rec : pool_scan.records)
        if (rec.images.size() != target)
            throw ContractError("pool identity " + rec.identity_id + " has " +
                                std::to_string(rec.images.size()) + " images, expected " +
                                std::to_string(target));

    std::vector<std::string> discarded;
    std::vector<const CleanReport*> kept_reports;
    for (const CleanReport& rep : reports) {
        if (rep.verdict == Verdict::discarded)
            discarded.push_back(rep.identity_id);
        else
            kept_reports.push_back(&rep);
    }
    std::sort(discarded.begin(), discarded.end());

    std::vector<std::string> missing;
    auto require_path = [&missing](const fs::path& p) {
        if (!fs::exists(p)) missing.push_back(p.generic_string());
    };

    // Cleaned tier: kept originals plus their replenished derivatives, scored
    // with source multiplicities so difficulty reflects the final group.
    std::vector<ScoredIdentity> cleaned;
    for (const CleanReport* rep : kept_reports) {
        ScoredIdentity s;
        s.identity_id = rep->identity_id;
        std::vector<std::size_t> rows;
        for (int idx : rep->kept) {
            const std::string key =
                rep->identity_id + "/" + rep->images.at(static_cast<std::size_t>(idx));
            auto it = index.find(key);
            if (it == index.end())
                throw ContractError("no embedding row for " + key);
            rows.push_back(it->second);
            const fs::path p = fs::path(args.root) / key;
            require_path(p);
            s.image_paths.push_back(p.generic_string());
        }
        const std::size_t need = target - rows.size();
        for (std::size_t k = 0; k < need; ++k) {
            char name[32];
            std::snprintf(name, sizeof name, "aug_%04zu.png", k);
            const fs::path p = fs::path(args.root) / rep->identity_id / name;
            require_path(p);
            s.image_paths.push_back(p.generic_string());
        }
        s.difficulty = score_difficulty(matrix, rows,
                                        replenish_multiplicities(rows.size(), target));
        cleaned.push_back(std::move(s));
    }

    Rng rng(derive_seed(args.seed, "replacements"));
    const auto pairs = select_replacements(discarded, pool_scan.records, rng);

    // Replacements adopt the id they stand in for; their paths stay in the
    // pool tree.
    std::vector<ScoredIdentity> synthetic;
    for (const auto& [discarded_id, pool_idx] : pairs) {
        const IdentityRecord& rec = pool_scan.records[pool_idx];
        ScoredIdentity s;
        s.identity_id = discarded_id;
        for (const ImageRef& ref : rec.images) {
            const fs::path p = fs::path(args.pool) / rec.identity_id / ref.filename;
            require_path(p);
            s.image_paths.push_back(p.generic_string());
        }
        std::vector<std::size_t> mult(rec.embedding_rows.size(), 1);
        s.difficulty = score_difficulty(pool_matrix, rec.embedding_rows, mult);
        synthetic.push_back(std::move(s));
    }

    if (!missing.empty())
        throw IoError("missing " + std::to_string(missing.size()) +
                      " image file(s), first: " + missing.front() +
                      " (did augment/generate run?)");

    const DatasetManifest manifest = build_manifest(synthetic, cleaned, target);
    write_manifest(manifest, args.out, target);

    std::printf("entries: %zu\n", manifest.entries.size());
    std::printf("synthetic: %zu\n", synthetic.size());
    std::printf("cleaned: %zu\n", cleaned.size());
    return kExitOk;
}

struct SynthArgs {
    std::string out, contaminate;
    std::size_t identities = 10;
    std::size_t images_per = 50;
    std::uint32_t dim = 64;
    double sigma_a = 0.05;
    std::uint64_t seed = 1;
    int image_px = 8;
};

int cmd_synth_corpus(const SynthArgs& args) {
    SynthCorpusSpec spec;
    spec.identities = args.identities;
    spec.images_per = args.images_per;
    spec.dim = args.dim;
    spec.sigma_a = args.sigma_a;
    spec.contamination = ContaminationSpec::parse(args.contaminate);
    spec.seed = args.seed;
    spec.image_px = args.image_px;

    const PlantedCorpus corpus = generate_planted_corpus(spec);
    write_planted_corpus(corpus, args.out, spec.image_px);

    std::size_t outliers = 0;
    for (const auto& [id, truth] : corpus.truth) outliers += truth.outliers.size();
    std::printf("identities: %zu\n", corpus.records.size());
    std::printf("images: %zu\n", corpus.matrix.rows());
    std::printf("planted_outliers: %zu\n", outliers);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    cv::setNumThreads(1); // worker threads already partition the corpus

    CLI::App app{"face dataset cleaning, replenishment and curriculum ordering"};
    app.require_subcommand(1);

    CleanArgs clean_args;
    CLI::App* clean = app.add_subcommand(
        "clean", "score identities, remove outlier images, write reports");
    clean->add_option("--root", clean_args.root, "dataset root directory")->required();
    clean->add_option("--embeddings", clean_args.embeddings,
                      "embedding file (default <root>/embeddings.emb1)");
    clean->add_option("--out", clean_args.out, "report file to write")->required();
    clean->add_option("--config", clean_args.config, "pipeline config JSON");
    clean->add_option("--llm", clean_args.llm_kind,
                      "override validation client kind (none|mock|http|replay)");
    clean->add_option("--threads", clean_args.threads, "worker threads (0 = all cores)");

    AugmentArgs augment_args;
    CLI::App* augment = app.add_subcommand(
        "augment", "replenish kept identities to the target image count");
    augment->add_option("--root", augment_args.root, "dataset root directory")->required();
    augment->add_option("--reports", augment_args.reports, "report file from clean")->required();
    augment->add_option("--config", augment_args.config, "pipeline config JSON");
    augment->add_option("--seed", augment_args.seed, "global augmentation seed");
    augment->add_option("--ledger", augment_args.ledger,
                        "recipe ledger path (default <root>/augment_ledger.jsonl)");

    GenerateArgs generate_args;
    CLI::App* generate = app.add_subcommand(
        "generate", "mint synthetic identities via the configured services");
    generate->add_option("--out", generate_args.out, "output root directory")->required();
    generate->add_option("--count", generate_args.count, "identities to generate")->required();
    generate->add_option("--config", generate_args.config, "pipeline config JSON");
    generate->add_option("--seed", generate_args.seed, "prompt sampling seed");

    ScreenArgs screen_args;
    CLI::App* screen = app.add_subcommand(
        "screen", "reject identities too similar to an evaluation gallery");
    screen->add_option("--root", screen_args.root, "dataset root directory")->required();
    screen->add_option("--embeddings", screen_args.embeddings,
                       "embedding file (default <root>/embeddings.emb1)");
    screen->add_option("--gallery", screen_args.gallery, "gallery EMB1 file")->required();
    screen->add_option("--tau", screen_args.tau, "similarity threshold (default from config)");
    screen->add_option("--out", screen_args.out,
                       "verdict file (default <root>/leak_verdicts.json)");
    screen->add_option("--config", screen_args.config, "pipeline config JSON");
    screen->add_option("--threads", screen_args.threads, "worker threads (0 = all cores)");

    OrderArgs order_args;
    CLI::App* order = app.add_subcommand(
        "order", "emit the curriculum manifest: synthetic tier first, easy to hard");
    order->add_option("--root", order_args.root, "cleaned dataset root")->required();
    order->add_option("--reports", order_args.reports, "report file from clean")->required();
    order->add_option("--pool", order_args.pool, "synthetic replacement pool root")->required();
    order->add_option("--out", order_args.out, "manifest file to write")->required();
    order->add_option("--config", order_args.config, "pipeline config JSON");
    order->add_option("--seed", order_args.seed, "replacement sampling seed");
    order->add_option("--embeddings", order_args.embeddings,
                      "embedding file (default <root>/embeddings.emb1)");
    order->add_option("--pool-embeddings", order_args.pool_embeddings,
                      "pool embedding file (default <pool>/embeddings.emb1)");

    SynthArgs synth_args;
    CLI::App* synth = app.add_subcommand(
        "synth-corpus", "write a synthetic dataset with known cluster structure");
    synth->add_option("--out", synth_args.out, "output root directory")->required();
    synth->add_option("--identities", synth_args.identities, "identity count");
    synth->add_option("--images-per", synth_args.images_per, "images per identity");
    synth->add_option("--dim", synth_args.dim, "embedding dimension");
    synth->add_option("--sigma", synth_args.sigma_a, "angular spread of clean points (radians)");
    synth->add_option("--contaminate", synth_args.contaminate,
                      "e.g. \"20%@noise,10%@cross\"");
    synth->add_option("--seed", synth_args.seed, "corpus seed");
    synth->add_option("--image-px", synth_args.image_px, "placeholder image edge length");

    CLI11_PARSE(app, argc, argv);

    try {
        if (clean->parsed()) return cmd_clean(clean_args);
        if (augment->parsed()) return cmd_augment(augment_args);
        if (generate->parsed()) return cmd_generate(generate_args);
        if (screen->parsed()) return cmd_screen(screen_args);
        if (order->parsed()) return cmd_order(order_args);
        if (synth->parsed()) return cmd_synth_corpus(synth_args);
    } catch (const ContractError& e) {
        std::fprintf(stderr, "contract error: %s\n", e.what());
        return kExitContract;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    }
    return kExitOk;
}
