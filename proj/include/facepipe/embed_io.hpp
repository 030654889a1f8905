#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "facepipe/types.hpp"

namespace facepipe {

/// EMB1 container header: magic "EMB1", u16 version, u32 dim, u64 count,
/// packed little-endian (18 bytes), followed by count*dim float32 LE.
struct EmbeddingFileHeader {
    static constexpr char kMagic[4] = {'E', 'M', 'B', '1'};
    static constexpr std::uint16_t kVersion = 1;
    std::uint32_t dim = 0;
    std::uint64_t count = 0;
};

/// Bijective map from relative image path (forward slashes) to row number.
/// Every row in [0, count) appears exactly once.
using RowIndex = std::map<std::string, std::size_t>;

void validate_row_index(const RowIndex& index, std::size_t count);

/// Reads an EMB1 file and its "<path>.idx.json" companion. Rows are
/// L2-normalized unless normalize = false (format round-trip checks need the
/// raw payload).
std::pair<EmbeddingMatrix, RowIndex> read_embeddings(const std::filesystem::path& path,
                                                     bool normalize = true);

/// EMB1 payload only, no path index (galleries carry labels instead).
EmbeddingMatrix read_embedding_matrix(const std::filesystem::path& path, bool normalize = true);

void write_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& matrix,
                      const RowIndex& index);

void write_embedding_matrix(const std::filesystem::path& path, const EmbeddingMatrix& matrix);

struct ScanResult {
    std::vector<IdentityRecord> records; // sorted by identity_id
    std::vector<std::string> skipped;    // non-conforming directory entries
};

/// Walks <root>/<6-digit id>/*.jpg|.png. Images are ordered
/// lexicographically; identities exceeding the 50-image cap are a contract
/// error; non-conforming entries land in the skip report.
ScanResult scan_dataset(const std::filesystem::path& root_dir,
                        std::size_t per_identity_cap = 50);

/// Fills record.embedding_rows from the row index (key = "<id>/<filename>").
void attach_embedding_rows(std::vector<IdentityRecord>& records, const RowIndex& index);

std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const std::string& text);

/// Validates then writes the manifest in canonical form.
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path,
                    std::size_t images_per_identity = 50);
DatasetManifest read_manifest(const std::filesystem::path& path);

} // namespace facepipe
