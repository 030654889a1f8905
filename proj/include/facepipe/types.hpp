#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace facepipe {

/// Row-major matrix of float32 embeddings, all rows sharing one dimension.
/// Rows are L2-normalized at ingestion; all types here are immutable once
/// built and safe to share across workers.
class EmbeddingMatrix {
public:
    EmbeddingMatrix() = default;
    explicit EmbeddingMatrix(std::uint32_t dim) : dim_(dim) {}

    std::uint32_t dim() const { return dim_; }
    std::size_t rows() const { return dim_ == 0 ? 0 : data_.size() / dim_; }

    std::span<const float> row(std::size_t i) const {
        return {data_.data() + i * dim_, dim_};
    }

    void add_row(std::span<const float> values);
    void reserve_rows(std::size_t n) { data_.reserve(n * dim_); }

    const std::vector<float>& raw() const { return data_; }
    std::vector<float>& raw() { return data_; }

    /// Scales every row to unit L2 norm (rows with zero norm are left as-is).
    /// Idempotent to within 1e-9.
    void l2_normalize_rows();

private:
    std::uint32_t dim_ = 0;
    std::vector<float> data_;
};

enum class Tier { cleaned, synthetic };

std::string to_string(Tier t);
Tier tier_from_string(const std::string& s);

struct ImageRef {
    std::string filename; // relative to the identity directory
};

/// One identity: its id, tier, ordered images, and the embedding row each
/// image resolves to. images and embedding_rows are parallel arrays.
struct IdentityRecord {
    std::string identity_id; // 6 decimal digits, zero padded
    Tier tier = Tier::cleaned;
    std::vector<ImageRef> images;
    std::vector<std::size_t> embedding_rows;
};

bool is_identity_id(const std::string& s);

enum class Verdict { kept, discarded };
enum class Reason { ok, below_fraction, below_count, calibration_failed };

std::string to_string(Verdict v);
std::string to_string(Reason r);
Verdict verdict_from_string(const std::string& s);
Reason reason_from_string(const std::string& s);

/// Per-identity cleaning outcome. kept/removed partition [0, n); labels has
/// one entry per image (-1 = noise).
struct CleanReport {
    std::string identity_id;
    std::vector<std::string> images; // filenames at clean time, audit trail
    std::optional<double> tau;       // calibrated threshold used for clustering
    std::vector<int> labels;
    std::vector<int> kept;
    std::vector<int> removed;
    bool llm_consulted = false;
    std::vector<int> llm_flagged;
    Verdict verdict = Verdict::kept;
    Reason reason = Reason::ok;
};

struct ManifestEntry {
    std::string identity_id;
    Tier tier = Tier::cleaned;
    double difficulty = 0.0;
    std::vector<std::string> image_paths;
};

/// Final output contract: ordered, tiered identity list. Synthetic entries
/// precede cleaned ones and every entry carries a full image group.
struct DatasetManifest {
    std::vector<ManifestEntry> entries;
};

/// Returns all invariant violations; empty means the manifest is valid.
std::vector<std::string> validate_manifest(const DatasetManifest& manifest,
                                           std::size_t images_per_identity = 50);

} // namespace facepipe
