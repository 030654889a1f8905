#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "facepipe/cleaner.hpp"
#include "facepipe/errors.hpp"
#include "facepipe/image.hpp"
#include "facepipe/json_io.hpp"
#include "facepipe/synthcorpus.hpp"
#include "facepipe/util.hpp"

using namespace facepipe;
namespace fs = std::filesystem;

namespace {

// Identities made of a tight planted cluster plus uniform noise. At dim 512
// noise similarities stay far below the 0.3 grid floor, so the expected
// outcome of every test corpus is known exactly.
struct CorpusBuilder {
    EmbeddingMatrix matrix{512};
    std::vector<IdentityRecord> records;
    Rng rng{987};

    IdentityRecord& add(const std::string& id, int n_clean, int n_noise) {
        IdentityRecord rec;
        rec.identity_id = id;
        const auto center = random_unit(rng, 512);
        const int n = n_clean + n_noise;
        for (int i = 0; i < n; ++i) {
            const std::vector<float> v =
                i < n_clean ? rotate_from(center, 0.02 * std::abs(rng.gaussian()), rng)
                            : random_unit(rng, 512);
            char name[16];
            std::snprintf(name, sizeof name, "%03d.png", i);
            rec.images.push_back({name});
            rec.embedding_rows.push_back(matrix.rows());
            matrix.add_row(v);
        }
        records.push_back(std::move(rec));
        return records.back();
    }

    CleanContext context() const {
        CleanContext ctx;
        ctx.matrix = &matrix;
        return ctx;
    }
};

std::vector<int> iota_int(int n) {
    std::vector<int> v(n);
    for (int i = 0; i < n; ++i) v[i] = i;
    return v;
}

// Identity whose images exist on disk, for the consultation path.
fs::path materialize(const IdentityRecord& rec, const char* dirname) {
    const fs::path root = fs::temp_directory_path() / dirname;
    fs::remove_all(root);
    fs::create_directories(root / rec.identity_id);
    for (std::size_t i = 0; i < rec.images.size(); ++i)
        save_png(root / rec.identity_id / rec.images[i].filename,
                 solid_color_image(8, 8, std::uint8_t(40 * i), 80, 120));
    return root;
}

std::unique_ptr<LlmGateway> scripted_gateway(std::vector<std::optional<std::string>> script) {
    return std::make_unique<LlmGateway>(std::make_unique<ScriptedLlmClient>(std::move(script)),
                                        0.0, 1);
}

} // namespace

TEST_SUITE("cleaner") {

TEST_CASE("fuse unions expert sets and validates the range") {
    ExpertVerdict a, b;
    a.outliers = {1, 3};
    b.outliers = {3, 4};
    CHECK(fuse({a, b}, 5) == std::set<int>{1, 3, 4});
    CHECK(fuse({}, 5).empty());
    b.outliers = {5};
    CHECK_THROWS_AS(fuse({a, b}, 5), ContractError);
    b.outliers = {-1};
    CHECK_THROWS_AS(fuse({b}, 5), ContractError);
}

TEST_CASE("a dominant planted cluster is kept and the scatter removed") {
    CorpusBuilder corpus;
    const IdentityRecord& rec = corpus.add("000001", 30, 20);
    const CleanOutcome out = clean_identity(corpus.context(), rec);
    const CleanReport& rep = out.report;

    CHECK(rep.verdict == Verdict::kept);
    CHECK(rep.reason == Reason::ok);
    CHECK(rep.kept == iota_int(30)); // exactly the planted cluster
    CHECK(rep.removed.size() == 20);
    REQUIRE(rep.tau.has_value());
    CHECK(*rep.tau == doctest::Approx(0.9)); // in band already at the top of the grid
    CHECK(!rep.llm_consulted);
    CHECK(rep.labels.size() == 50);
    for (int i = 0; i < 30; ++i) CHECK(rep.labels[i] == 0);
    for (int i = 30; i < 50; ++i) CHECK(rep.labels[i] == -1);
    CHECK(!out.transcript.has_value());
}

TEST_CASE("keep/discard thresholds") {
    CorpusBuilder corpus;
    CleanContext ctx = corpus.context();

    SUBCASE("kept below the absolute floor discards the identity") {
        const CleanOutcome out = clean_identity(ctx, corpus.add("000001", 5, 45));
        CHECK(out.report.verdict == Verdict::discarded);
        CHECK(out.report.reason == Reason::below_count);
        CHECK(out.report.kept.size() == 5);
    }

    SUBCASE("exactly 10 of 50 kept is still acceptable") {
        const CleanOutcome out = clean_identity(ctx, corpus.add("000001", 10, 40));
        CHECK(out.report.verdict == Verdict::kept);
        CHECK(out.report.reason == Reason::ok);
        CHECK(out.report.kept.size() == 10);
    }

    SUBCASE("fraction rule fires when the count rule is relaxed") {
        ctx.config.min_keep_count = 3;
        ctx.config.min_keep_fraction = 0.5;
        const CleanOutcome out = clean_identity(ctx, corpus.add("000001", 8, 12));
        CHECK(out.report.verdict == Verdict::discarded);
        CHECK(out.report.reason == Reason::below_fraction); // 8 >= 3 but < ceil(0.5 * 20)
    }

    SUBCASE("count rule precedes fraction rule") {
        ctx.config.min_keep_count = 10;
        ctx.config.min_keep_fraction = 0.5;
        const CleanOutcome out = clean_identity(ctx, corpus.add("000001", 8, 12));
        CHECK(out.report.reason == Reason::below_count); // 8 trips both, count wins
    }

    SUBCASE("an identity with no images fails calibration") {
        IdentityRecord empty;
        empty.identity_id = "000009";
        const CleanOutcome out = clean_identity(ctx, empty);
        CHECK(out.report.verdict == Verdict::discarded);
        CHECK(out.report.reason == Reason::calibration_failed);
        CHECK(!out.report.tau.has_value());
        CHECK(out.report.kept.empty());
        CHECK(out.report.removed.empty());
    }
}

TEST_CASE("kept and removed always partition the index set") {
    CorpusBuilder corpus;
    Rng rng(55);
    for (int round = 0; round < 12; ++round) {
        char id[16];
        std::snprintf(id, sizeof id, "%06d", round);
        const int n_clean = 1 + static_cast<int>(rng.below(30));
        const int n_noise = static_cast<int>(rng.below(20));
        corpus.add(id, n_clean, n_noise);
    }
    const CleanContext ctx = corpus.context();
    for (const IdentityRecord& rec : corpus.records) {
        const CleanReport rep = clean_identity(ctx, rec).report;
        std::vector<char> seen(rec.images.size(), 0);
        for (int i : rep.kept) seen.at(static_cast<std::size_t>(i)) += 1;
        for (int i : rep.removed) seen.at(static_cast<std::size_t>(i)) += 1;
        for (char s : seen) CHECK(s == 1);
        if (rep.verdict == Verdict::discarded) CHECK(rep.reason != Reason::ok);
        if (rep.verdict == Verdict::kept) CHECK(rep.reason == Reason::ok);
    }
}

TEST_CASE("a pristine identity is ambiguous and triggers the second expert") {
    // All images cohere, the largest-cluster fraction is 1.0 > band_hi, so
    // calibration is infeasible and the cluster expert alone cannot resolve
    // the identity.
    CorpusBuilder corpus;
    const IdentityRecord& rec = corpus.add("000042", 12, 0);
    const fs::path root = materialize(rec, "facepipe_cleaner_llm");

    CleanContext ctx = corpus.context();
    ctx.image_root = root;

    SUBCASE("valid response on the first attempt") {
        auto gw = scripted_gateway({std::string("000,001")});
        ctx.llm = gw.get();
        const CleanOutcome out = clean_identity(ctx, rec);
        CHECK(out.report.llm_consulted);
        CHECK(out.report.llm_flagged == std::vector<int>{0, 1});
        CHECK(out.report.removed == std::vector<int>{0, 1}); // union with empty cluster verdict
        CHECK(out.report.kept.size() == 10);
        CHECK(out.report.verdict == Verdict::kept);
        REQUIRE(out.transcript.has_value());
        CHECK(out.transcript->identity_id == "000042");
        CHECK(out.transcript->attempts == 1);
        CHECK(!out.transcript->parse_failed);
        CHECK(out.transcript->response == "000,001");
        CHECK(out.transcript->image_digest.size() == 16);
    }

    SUBCASE("grammar failures burn attempts until a response parses") {
        auto gw = scripted_gateway({std::string("the outliers are 0 and 1"), std::string("002")});
        ctx.llm = gw.get();
        const CleanOutcome out = clean_identity(ctx, rec);
        CHECK(out.report.llm_flagged == std::vector<int>{2});
        CHECK(out.transcript->attempts == 2);
        CHECK(!out.transcript->parse_failed);
    }

    SUBCASE("transport failures are retried") {
        auto gw = scripted_gateway({std::nullopt, std::string("001")});
        ctx.llm = gw.get();
        const CleanOutcome out = clean_identity(ctx, rec);
        CHECK(out.report.llm_flagged == std::vector<int>{1});
        CHECK(out.transcript->attempts == 2);
    }

    SUBCASE("every attempt failing leaves the cluster verdict standing") {
        auto gw = scripted_gateway({std::string("no outliers found")});
        ctx.llm = gw.get();
        const CleanOutcome out = clean_identity(ctx, rec);
        CHECK(out.report.llm_consulted);
        CHECK(out.report.llm_flagged.empty());
        CHECK(out.report.kept.size() == 12); // nothing removed
        CHECK(out.report.verdict == Verdict::kept);
        REQUIRE(out.transcript.has_value());
        CHECK(out.transcript->parse_failed);
        CHECK(out.transcript->attempts == 3); // default budget
    }

    SUBCASE("an unambiguous identity never consults") {
        CorpusBuilder other;
        const IdentityRecord& plain = other.add("000001", 30, 20);
        CleanContext ctx2 = other.context();
        auto client = std::make_unique<ScriptedLlmClient>(
            std::vector<std::optional<std::string>>{std::string("000")});
        ScriptedLlmClient* raw = client.get();
        LlmGateway gw(std::move(client), 0.0, 1);
        ctx2.llm = &gw;
        ctx2.image_root = root; // unused
        const CleanOutcome out = clean_identity(ctx2, plain);
        CHECK(!out.report.llm_consulted);
        CHECK(raw->calls() == 0);
    }

    fs::remove_all(root);
}

TEST_CASE("clean_corpus discards exactly the planted-bad identities") {
    CorpusBuilder corpus;
    for (int i = 0; i < 10; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "%06d", i);
        if (i == 3 || i == 7)
            corpus.add(id, 5, 45); // below the keep floor once cleaned
        else
            corpus.add(id, 30, 20);
    }
    const CleanRun run = clean_corpus(corpus.context(), corpus.records, 2);

    CHECK(run.errors.empty());
    CHECK(run.stats.identities == 10);
    CHECK(run.stats.discarded_identities == 2);
    CHECK(run.stats.kept_identities == 8);
    CHECK(run.stats.images_seen == 500);
    CHECK(run.stats.images_removed == 8 * 20 + 2 * 45);
    CHECK(run.stats.llm_consults == 0);
    CHECK(run.stats.mean_tau == doctest::Approx(0.9));

    REQUIRE(run.reports.size() == 10);
    for (int i = 0; i < 10; ++i) {
        const CleanReport& rep = run.reports[static_cast<std::size_t>(i)];
        const bool bad = i == 3 || i == 7;
        CHECK(rep.verdict == (bad ? Verdict::discarded : Verdict::kept));
    }
}

TEST_CASE("clean_corpus output does not depend on the thread count") {
    CorpusBuilder corpus;
    for (int i = 0; i < 9; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "%06d", i);
        corpus.add(id, 10 + i, i % 4 * 6);
    }
    const CleanRun one = clean_corpus(corpus.context(), corpus.records, 1);
    const CleanRun four = clean_corpus(corpus.context(), corpus.records, 4);

    REQUIRE(one.reports.size() == four.reports.size());
    for (std::size_t i = 0; i < one.reports.size(); ++i)
        CHECK(dump_canonical(report_to_json(one.reports[i])) ==
              dump_canonical(report_to_json(four.reports[i])));
    CHECK(one.stats.images_removed == four.stats.images_removed);
    CHECK(one.stats.mean_tau == four.stats.mean_tau);
}

TEST_CASE("clean_corpus isolates per-identity failures and rejects duplicates") {
    CorpusBuilder corpus;
    corpus.add("000001", 20, 0);
    corpus.add("000002", 20, 0);
    corpus.records[1].embedding_rows.pop_back(); // images/rows mismatch

    const CleanRun run = clean_corpus(corpus.context(), corpus.records, 2);
    CHECK(run.reports.size() == 1);
    CHECK(run.reports[0].identity_id == "000001");
    REQUIRE(run.errors.size() == 1);
    CHECK(run.errors[0].find("000002") != std::string::npos);

    corpus.records[1] = corpus.records[0];
    CHECK_THROWS_AS(clean_corpus(corpus.context(), corpus.records, 2), ContractError);
}

TEST_CASE("reports round trip through json and disk") {
    CorpusBuilder corpus;
    corpus.add("000001", 30, 20);
    corpus.add("000002", 5, 45);
    IdentityRecord empty;
    empty.identity_id = "000003";
    corpus.records.push_back(empty);

    const CleanRun run = clean_corpus(corpus.context(), corpus.records, 1);
    REQUIRE(run.reports.size() == 3);

    for (const CleanReport& rep : run.reports) {
        const CleanReport back = report_from_json(report_to_json(rep));
        CHECK(dump_canonical(report_to_json(back)) == dump_canonical(report_to_json(rep)));
        CHECK(back.identity_id == rep.identity_id);
        CHECK(back.kept == rep.kept);
        CHECK(back.removed == rep.removed);
        CHECK(back.labels == rep.labels);
        CHECK(back.verdict == rep.verdict);
        CHECK(back.reason == rep.reason);
        CHECK(back.tau.has_value() == rep.tau.has_value());
    }

    const fs::path dir = fs::temp_directory_path() / "facepipe_cleaner_reports";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path path = dir / "reports.json";
    write_reports(path, run);

    const std::string text = read_file_text(path);
    CHECK(text == dump_canonical(nlohmann::json::parse(text)));
    const auto j = nlohmann::json::parse(text);
    CHECK(j.at("version") == 1);
    CHECK(j.at("summary").at("identities") == 3);

    const std::vector<CleanReport> back = read_reports(path);
    REQUIRE(back.size() == 3);
    CHECK(back[2].reason == Reason::calibration_failed);

    write_file_text(path, "{\"version\":1}\n");
    CHECK_THROWS_AS(read_reports(path), IoError);
    write_file_text(path, "not json");
    CHECK_THROWS_AS(read_reports(path), IoError);
    fs::remove_all(dir);
}

} // TEST_SUITE
