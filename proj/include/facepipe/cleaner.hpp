#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include <json.hpp>

#include "facepipe/clients.hpp"
#include "facepipe/cluster.hpp"
#include "facepipe/config.hpp"
#include "facepipe/llm_expert.hpp"
#include "facepipe/types.hpp"

namespace facepipe {

/// Union of the experts' outlier sets; indices must lie in [0, n).
std::set<int> fuse(const std::vector<ExpertVerdict>& verdicts, std::size_t n);

/// Shared, read-only state for cleaning one corpus.
struct CleanContext {
    const EmbeddingMatrix* matrix = nullptr;
    CleanConfig config;
    GridSpec grid;
    LlmGateway* llm = nullptr;              // null: cluster expert only
    int llm_budget = 3;
    std::filesystem::path image_root;       // where composite inputs are read from
};

struct CleanOutcome {
    CleanReport report;
    std::optional<LlmTranscript> transcript;
};

/// Calibrates, clusters, optionally consults the second expert on ambiguous
/// identities, fuses and applies the keep/discard rules. Never mutates files.
CleanOutcome clean_identity(const CleanContext& ctx, const IdentityRecord& record);

struct CleanStats {
    std::size_t identities = 0;
    std::size_t kept_identities = 0;
    std::size_t discarded_identities = 0;
    std::size_t images_seen = 0;
    std::size_t images_removed = 0;
    std::size_t llm_consults = 0;
    double mean_tau = 0.0; // over identities with a calibrated tau
};

struct CleanRun {
    std::vector<CleanReport> reports;         // sorted by identity_id
    std::vector<LlmTranscript> transcripts;   // sorted by identity_id
    std::vector<std::string> errors;          // per-identity failures, sorted
    CleanStats stats;
};

/// Cleans identities in parallel; output order and content do not depend on
/// the thread count. A failing identity contributes an error entry instead
/// of aborting the run.
CleanRun clean_corpus(const CleanContext& ctx, const std::vector<IdentityRecord>& records,
                      unsigned threads);

nlohmann::json report_to_json(const CleanReport& report);
CleanReport report_from_json(const nlohmann::json& j);

/// {"version":1,"summary":{...},"reports":[...]} with canonical encoding.
void write_reports(const std::filesystem::path& path, const CleanRun& run);
std::vector<CleanReport> read_reports(const std::filesystem::path& path);

void write_transcripts(const std::filesystem::path& path,
                       const std::vector<LlmTranscript>& transcripts);

} // namespace facepipe
