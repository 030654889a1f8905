#include "facepipe/embed_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "facepipe/errors.hpp"
#include "facepipe/json_io.hpp"
#include "facepipe/util.hpp"

namespace facepipe {

namespace {

constexpr std::size_t kHeaderBytes = 18;

static_assert(std::endian::native == std::endian::little,
              "EMB1 I/O assumes a little-endian host");

void put_u16(std::uint8_t* p, std::uint16_t v) {
    p[0] = static_cast<std::uint8_t>(v);
    p[1] = static_cast<std::uint8_t>(v >> 8);
}

void put_u32(std::uint8_t* p, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

void put_u64(std::uint8_t* p, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint16_t get_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

std::filesystem::path index_path_for(const std::filesystem::path& emb_path) {
    return std::filesystem::path(emb_path.string() + ".idx.json");
}

RowIndex read_row_index(const std::filesystem::path& path, std::size_t count) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file_text(path));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("index parse error in " + path.string() + ": " + e.what());
    }
    if (!j.is_object()) throw IoError("index error: " + path.string() + " is not an object");
    RowIndex index;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!it.value().is_number_unsigned())
            throw IoError("index error: non-integer row for " + it.key());
        index[it.key()] = it.value().get<std::size_t>();
    }
    try {
        validate_row_index(index, count);
    } catch (const ContractError& e) {
        throw IoError("index error in " + path.string() + ": " + e.what());
    }
    return index;
}

} // namespace

void validate_row_index(const RowIndex& index, std::size_t count) {
    if (index.size() != count)
        throw ContractError("row index has " + std::to_string(index.size()) +
                            " entries for " + std::to_string(count) + " rows");
    std::vector<bool> seen(count, false);
    for (const auto& [path, row] : index) {
        if (row >= count)
            throw ContractError("row " + std::to_string(row) + " out of range for " + path);
        if (seen[row])
            throw ContractError("row " + std::to_string(row) + " mapped twice");
        seen[row] = true;
    }
}

EmbeddingMatrix read_embedding_matrix(const std::filesystem::path& path, bool normalize) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open embedding file: " + path.string());

    std::uint8_t header[kHeaderBytes];
    f.read(reinterpret_cast<char*>(header), kHeaderBytes);
    if (!f) throw IoError("format error: " + path.string() + " is shorter than the header");
    if (std::memcmp(header, EmbeddingFileHeader::kMagic, 4) != 0)
        throw IoError("format error: bad magic in " + path.string());
    if (get_u16(header + 4) != EmbeddingFileHeader::kVersion)
        throw IoError("format error: unsupported version in " + path.string());
    const std::uint32_t dim = get_u32(header + 6);
    const std::uint64_t count = get_u64(header + 10);
    if (dim < 1) throw IoError("format error: dim must be >= 1 in " + path.string());

    f.seekg(0, std::ios::end);
    const auto file_size = static_cast<std::uint64_t>(f.tellg());
    const std::uint64_t expected = kHeaderBytes + count * dim * sizeof(float);
    if (file_size != expected)
        throw IoError("truncation error: " + path.string() + " has " +
                      std::to_string(file_size) + " bytes, expected " + std::to_string(expected));
    f.seekg(kHeaderBytes);

    EmbeddingMatrix matrix(dim);
    matrix.raw().resize(static_cast<std::size_t>(count) * dim);
    if (count > 0) {
        f.read(reinterpret_cast<char*>(matrix.raw().data()),
               static_cast<std::streamsize>(count * dim * sizeof(float)));
        if (!f) throw IoError("truncation error: short read in " + path.string());
    }
    if (normalize) matrix.l2_normalize_rows();
    return matrix;
}

std::pair<EmbeddingMatrix, RowIndex> read_embeddings(const std::filesystem::path& path,
                                                     bool normalize) {
    EmbeddingMatrix matrix = read_embedding_matrix(path, normalize);
    RowIndex index = read_row_index(index_path_for(path), matrix.rows());
    return {std::move(matrix), std::move(index)};
}

void write_embedding_matrix(const std::filesystem::path& path, const EmbeddingMatrix& matrix) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open embedding file for writing: " + path.string());
    std::uint8_t header[kHeaderBytes];
    std::memcpy(header, EmbeddingFileHeader::kMagic, 4);
    put_u16(header + 4, EmbeddingFileHeader::kVersion);
    put_u32(header + 6, matrix.dim());
    put_u64(header + 10, matrix.rows());
    f.write(reinterpret_cast<const char*>(header), kHeaderBytes);
    if (!matrix.raw().empty())
        f.write(reinterpret_cast<const char*>(matrix.raw().data()),
                static_cast<std::streamsize>(matrix.raw().size() * sizeof(float)));
    if (!f) throw IoError("short write: " + path.string());
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& matrix,
                      const RowIndex& index) {
    validate_row_index(index, matrix.rows());
    write_embedding_matrix(path, matrix);

    nlohmann::json j = nlohmann::json::object();
    for (const auto& [key, row] : index) j[key] = row;
    write_file_text(index_path_for(path), dump_canonical(j));
}

ScanResult scan_dataset(const std::filesystem::path& root_dir, std::size_t per_identity_cap) {
    if (!std::filesystem::is_directory(root_dir))
        throw IoError("dataset root does not exist: " + root_dir.string());

    ScanResult result;
    std::error_code ec;
    for (const auto& entry : std::filesystem::directory_iterator(root_dir, ec)) {
        const std::string name = entry.path().filename().string();
        if (!entry.is_directory() || !is_identity_id(name)) {
            result.skipped.push_back(name);
            continue;
        }
        IdentityRecord record;
        record.identity_id = name;
        for (const auto& img : std::filesystem::directory_iterator(entry.path())) {
            if (!img.is_regular_file()) continue;
            const std::string ext = img.path().extension().string();
            if (ext != ".jpg" && ext != ".png") continue;
            record.images.push_back({img.path().filename().string()});
        }
        std::sort(record.images.begin(), record.images.end(),
                  [](const ImageRef& a, const ImageRef& b) { return a.filename < b.filename; });
        if (record.images.size() > per_identity_cap)
            throw ContractError("per-identity cap exceeded: " + name + " has " +
                                std::to_string(record.images.size()) + " images (cap " +
                                std::to_string(per_identity_cap) + ")");
        result.records.push_back(std::move(record));
    }
    if (ec) throw IoError("cannot read dataset root " + root_dir.string() + ": " + ec.message());

    std::sort(result.records.begin(), result.records.end(),
              [](const IdentityRecord& a, const IdentityRecord& b) {
                  return a.identity_id < b.identity_id;
              });
    std::sort(result.skipped.begin(), result.skipped.end());
    return result;
}

void attach_embedding_rows(std::vector<IdentityRecord>& records, const RowIndex& index) {
    std::vector<std::string> missing;
    for (auto& record : records) {
        record.embedding_rows.clear();
        record.embedding_rows.reserve(record.images.size());
        for (const auto& img : record.images) {
            const std::string key = record.identity_id + "/" + img.filename;
            auto it = index.find(key);
            if (it == index.end()) {
                missing.push_back(key);
                continue;
            }
            record.embedding_rows.push_back(it->second);
        }
    }
    if (!missing.empty()) {
        std::string msg = "embedding rows missing for " + std::to_string(missing.size()) +
                          " image(s), first: " + missing.front();
        throw ContractError(msg);
    }
}

std::string manifest_to_json(const DatasetManifest& manifest) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : manifest.entries) {
        entries.push_back({
            {"identity_id", e.identity_id},
            {"tier", to_string(e.tier)},
            {"difficulty", e.difficulty},
            {"image_paths", e.image_paths},
        });
    }
    nlohmann::json j{{"version", 1}, {"entries", std::move(entries)}};
    return dump_canonical(j);
}

DatasetManifest manifest_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("manifest parse error: ") + e.what());
    }
    if (!j.is_object() || j.value("version", 0) != 1)
        throw IoError("manifest format error: expected version 1");
    DatasetManifest manifest;
    for (const auto& je : j.at("entries")) {
        ManifestEntry e;
        je.at("identity_id").get_to(e.identity_id);
        e.tier = tier_from_string(je.at("tier").get<std::string>());
        je.at("difficulty").get_to(e.difficulty);
        je.at("image_paths").get_to(e.image_paths);
        manifest.entries.push_back(std::move(e));
    }
    return manifest;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path,
                    std::size_t images_per_identity) {
    auto violations = validate_manifest(manifest, images_per_identity);
    if (!violations.empty())
        throw ContractError("manifest validation failed: " + violations.front() + " (" +
                            std::to_string(violations.size()) + " violation(s))");
    write_file_text(path, manifest_to_json(manifest));
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
    return manifest_from_json(read_file_text(path));
}

} // namespace facepipe
