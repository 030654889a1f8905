#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "facepipe/types.hpp"

namespace facepipe {

/// Evaluation-set embeddings plus one label per row (e.g. the gallery
/// subject's name). Rows are unit-normalized on load.
struct GalleryIndex {
    EmbeddingMatrix embeddings;
    std::vector<std::string> labels;
};

/// Reads an EMB1 file plus its "<path>.labels.json" sidecar (a JSON array of
/// strings, one per row).
GalleryIndex load_gallery(const std::filesystem::path& path);

void write_gallery(const std::filesystem::path& path, const EmbeddingMatrix& embeddings,
                   const std::vector<std::string>& labels);

struct LeakVerdict {
    std::string identity_id;
    double max_similarity = -1.0;
    std::optional<std::string> matched_label; // set when the screen fails
    bool passed = false;
};

/// Max cosine similarity between any identity row and any gallery row;
/// passes only when strictly below tau_leak.
LeakVerdict screen_identity(const EmbeddingMatrix& matrix, const IdentityRecord& record,
                            const GalleryIndex& gallery, double tau_leak);

struct ScreenSummary {
    std::size_t n_passed = 0;
    std::size_t n_failed = 0;
    double tau_leak = 0.0;
    std::vector<std::string> failed_ids;
};

struct ScreenRun {
    std::vector<LeakVerdict> verdicts; // sorted by identity_id
    ScreenSummary summary;
};

ScreenRun screen_corpus(const EmbeddingMatrix& matrix,
                        const std::vector<IdentityRecord>& records, const GalleryIndex& gallery,
                        double tau_leak, unsigned threads);

nlohmann::json verdict_to_json(const LeakVerdict& v);

void write_screen_run(const std::filesystem::path& path, const ScreenRun& run);

} // namespace facepipe
