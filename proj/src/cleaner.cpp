#include "facepipe/cleaner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "facepipe/errors.hpp"
#include "facepipe/image.hpp"
#include "facepipe/json_io.hpp"
#include "facepipe/util.hpp"

namespace facepipe {

namespace {

// Smallest kept count that still satisfies the keep-fraction rule. The guard
// keeps binary noise in fraction * n from tipping exact multiples (0.20 * 50
// must stay 10, not 11).
std::size_t fraction_floor(double fraction, std::size_t n) {
    return static_cast<std::size_t>(
        std::ceil(fraction * static_cast<double>(n) - 1e-9));
}

std::size_t second_largest_size(const ClusterLabels& labels) {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(labels.n_clusters), 0);
    for (int l : labels.labels)
        if (l >= 0) ++sizes[static_cast<std::size_t>(l)];
    if (sizes.size() < 2) return 0;
    std::sort(sizes.rbegin(), sizes.rend());
    return sizes[1];
}

} // namespace

std::set<int> fuse(const std::vector<ExpertVerdict>& verdicts, std::size_t n) {
    std::set<int> out;
    for (const ExpertVerdict& v : verdicts) {
        for (int idx : v.outliers) {
            if (idx < 0 || static_cast<std::size_t>(idx) >= n)
                throw ContractError("fuse: outlier index " + std::to_string(idx) +
                                    " outside [0, " + std::to_string(n) + ")");
            out.insert(idx);
        }
    }
    return out;
}

CleanOutcome clean_identity(const CleanContext& ctx, const IdentityRecord& record) {
    if (!ctx.matrix) throw ContractError("clean_identity: no embedding matrix");
    const std::size_t n = record.images.size();

    CleanOutcome out;
    CleanReport& rep = out.report;
    rep.identity_id = record.identity_id;
    for (const ImageRef& ref : record.images) rep.images.push_back(ref.filename);

    if (n == 0) {
        rep.verdict = Verdict::discarded;
        rep.reason = Reason::calibration_failed;
        return out;
    }
    if (record.embedding_rows.size() != n)
        throw ContractError("clean_identity: identity " + record.identity_id + " has " +
                            std::to_string(n) + " images but " +
                            std::to_string(record.embedding_rows.size()) + " embedding rows");

    const std::vector<double> sims = pairwise_similarity(*ctx.matrix, record.embedding_rows);
    const CalibrationResult cal = calibrate_tau_from_similarity(sims, n, ctx.config);
    const int min_pts = static_cast<int>(
        std::min<std::size_t>(static_cast<std::size_t>(ctx.config.min_pts), n));
    const ClusterLabels labels = dbscan_from_similarity(sims, n, *cal.tau, min_pts);
    const LargestCluster largest = largest_cluster(labels);

    rep.tau = cal.tau;
    rep.labels = labels.labels;

    std::vector<ExpertVerdict> verdicts(1);
    verdicts[0].source = ExpertVerdict::Source::cluster;
    {
        std::vector<char> in_largest(n, 0);
        for (std::size_t m : largest.members) in_largest[m] = 1;
        for (std::size_t i = 0; i < n; ++i)
            if (!in_largest[i]) verdicts[0].outliers.insert(static_cast<int>(i));
    }

    const bool ambiguous =
        !cal.feasible || 2 * second_largest_size(labels) >= largest.members.size();

    if (ambiguous && ctx.llm) {
        std::vector<Image> images;
        images.reserve(n);
        for (const ImageRef& ref : record.images)
            images.push_back(load_image(ctx.image_root / record.identity_id / ref.filename));
        ConsultResult consult_result =
            consult(images, *ctx.llm, ctx.grid, ctx.llm_budget, record.identity_id);
        rep.llm_consulted = true;
        rep.llm_flagged.assign(consult_result.verdict.outliers.begin(),
                               consult_result.verdict.outliers.end());
        if (consult_result.transcript.parse_failed)
            std::fprintf(stderr,
                         "warning: identity %s: no usable expert response after %d attempts; "
                         "cluster verdict stands\n",
                         record.identity_id.c_str(), consult_result.transcript.attempts);
        verdicts.push_back(consult_result.verdict);
        out.transcript = std::move(consult_result.transcript);
    }

    const std::set<int> removed = fuse(verdicts, n);
    for (std::size_t i = 0; i < n; ++i) {
        if (removed.count(static_cast<int>(i)))
            rep.removed.push_back(static_cast<int>(i));
        else
            rep.kept.push_back(static_cast<int>(i));
    }

    const std::size_t kept = rep.kept.size();
    if (kept < static_cast<std::size_t>(ctx.config.min_keep_count)) {
        rep.verdict = Verdict::discarded;
        rep.reason = Reason::below_count;
    } else if (kept < fraction_floor(ctx.config.min_keep_fraction, n)) {
        rep.verdict = Verdict::discarded;
        rep.reason = Reason::below_fraction;
    } else {
        rep.verdict = Verdict::kept;
        rep.reason = Reason::ok;
    }
    return out;
}

CleanRun clean_corpus(const CleanContext& ctx, const std::vector<IdentityRecord>& records,
                      unsigned threads) {
    std::vector<std::size_t> order(records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return records[a].identity_id < records[b].identity_id;
    });
    for (std::size_t i = 1; i < order.size(); ++i)
        if (records[order[i - 1]].identity_id == records[order[i]].identity_id)
            throw ContractError("clean_corpus: duplicate identity " +
                                records[order[i]].identity_id);

    std::vector<std::optional<CleanOutcome>> outcomes(records.size());
    std::vector<std::string> errors(records.size());
    parallel_for(records.size(), threads, [&](std::size_t slot) {
        const IdentityRecord& rec = records[order[slot]];
        try {
            outcomes[slot] = clean_identity(ctx, rec);
        } catch (const std::exception& e) {
            errors[slot] = "identity " + rec.identity_id + ": " + e.what();
        }
    });

    CleanRun run;
    double tau_sum = 0.0;
    std::size_t tau_count = 0;
    for (std::size_t slot = 0; slot < records.size(); ++slot) {
        if (!errors[slot].empty()) {
            run.errors.push_back(errors[slot]);
            continue;
        }
        CleanOutcome& oc = *outcomes[slot];
        run.stats.identities += 1;
        run.stats.images_seen += oc.report.images.size();
        run.stats.images_removed += oc.report.removed.size();
        if (oc.report.verdict == Verdict::kept)
            run.stats.kept_identities += 1;
        else
            run.stats.discarded_identities += 1;
        if (oc.report.llm_consulted) run.stats.llm_consults += 1;
        if (oc.report.tau) {
            tau_sum += *oc.report.tau;
            tau_count += 1;
        }
        if (oc.transcript) run.transcripts.push_back(std::move(*oc.transcript));
        run.reports.push_back(std::move(oc.report));
    }
    run.stats.mean_tau = tau_count ? tau_sum / static_cast<double>(tau_count) : 0.0;
    return run;
}

nlohmann::json report_to_json(const CleanReport& report) {
    nlohmann::json j;
    j["identity_id"] = report.identity_id;
    j["images"] = report.images;
    j["tau"] = report.tau ? nlohmann::json(*report.tau) : nlohmann::json(nullptr);
    j["labels"] = report.labels;
    j["kept"] = report.kept;
    j["removed"] = report.removed;
    j["llm_consulted"] = report.llm_consulted;
    j["llm_flagged"] = report.llm_flagged;
    j["verdict"] = to_string(report.verdict);
    j["reason"] = to_string(report.reason);
    return j;
}

CleanReport report_from_json(const nlohmann::json& j) {
    CleanReport rep;
    rep.identity_id = j.at("identity_id").get<std::string>();
    rep.images = j.at("images").get<std::vector<std::string>>();
    if (!j.at("tau").is_null()) rep.tau = j.at("tau").get<double>();
    rep.labels = j.at("labels").get<std::vector<int>>();
    rep.kept = j.at("kept").get<std::vector<int>>();
    rep.removed = j.at("removed").get<std::vector<int>>();
    rep.llm_consulted = j.at("llm_consulted").get<bool>();
    rep.llm_flagged = j.at("llm_flagged").get<std::vector<int>>();
    rep.verdict = verdict_from_string(j.at("verdict").get<std::string>());
    rep.reason = reason_from_string(j.at("reason").get<std::string>());
    return rep;
}

void write_reports(const std::filesystem::path& path, const CleanRun& run) {
    nlohmann::json reports = nlohmann::json::array();
    for (const CleanReport& rep : run.reports) reports.push_back(report_to_json(rep));
    nlohmann::json j;
    j["version"] = 1;
    j["summary"] = {{"identities", run.stats.identities},
                    {"kept_identities", run.stats.kept_identities},
                    {"discarded_identities", run.stats.discarded_identities},
                    {"images_seen", run.stats.images_seen},
                    {"images_removed", run.stats.images_removed},
                    {"llm_consults", run.stats.llm_consults},
                    {"mean_tau", run.stats.mean_tau}};
    j["reports"] = reports;
    write_file_text(path, dump_canonical(j));
}

std::vector<CleanReport> read_reports(const std::filesystem::path& path) {
    nlohmann::json j = nlohmann::json::parse(read_file_text(path), nullptr, false);
    if (j.is_discarded() || !j.is_object() || j.value("version", 0) != 1 ||
        !j.contains("reports") || !j["reports"].is_array())
        throw IoError("malformed report file: " + path.string());
    std::vector<CleanReport> out;
    try {
        for (const nlohmann::json& item : j["reports"]) out.push_back(report_from_json(item));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed report file: " + path.string() + ": " + e.what());
    }
    return out;
}

void write_transcripts(const std::filesystem::path& path,
                       const std::vector<LlmTranscript>& transcripts) {
    std::vector<const LlmTranscript*> sorted;
    for (const LlmTranscript& t : transcripts) sorted.push_back(&t);
    std::sort(sorted.begin(), sorted.end(), [](const LlmTranscript* a, const LlmTranscript* b) {
        return a->identity_id < b->identity_id;
    });
    std::string out;
    for (const LlmTranscript* t : sorted) out += dump_canonical(transcript_to_json(*t));
    write_file_text(path, out);
}

} // namespace facepipe
