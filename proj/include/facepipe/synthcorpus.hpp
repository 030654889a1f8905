#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "facepipe/embed_io.hpp"
#include "facepipe/rng.hpp"
#include "facepipe/types.hpp"

namespace facepipe {

/// Fraction of each identity's images replaced by random-direction noise or
/// by points near another identity's centroid. Parsed from strings like
/// "20%@noise,10%@cross" (either part optional, empty string = clean).
struct ContaminationSpec {
    double noise_frac = 0.0;
    double cross_frac = 0.0;

    static ContaminationSpec parse(const std::string& text);
};

struct SynthCorpusSpec {
    std::size_t identities = 10;
    std::size_t images_per = 50;
    std::uint32_t dim = 64;
    double sigma_a = 0.05; // angular spread (radians) of clean points
    ContaminationSpec contamination;
    std::uint64_t seed = 1;
    int image_px = 8; // placeholder image edge length
};

enum class PlantKind { clean, noise, cross };

std::string to_string(PlantKind k);

struct PlantedIdentityTruth {
    std::vector<PlantKind> kinds; // one per image, in filename order
    std::set<int> outliers;       // indices with kind != clean
};

struct PlantedCorpus {
    std::vector<IdentityRecord> records; // sorted by id, rows attached
    EmbeddingMatrix matrix;              // unit rows
    RowIndex index;
    std::map<std::string, PlantedIdentityTruth> truth;
};

/// Unit vector with iid gaussian coordinates.
std::vector<float> random_unit(Rng& rng, std::uint32_t dim);

/// Unit vector at angle theta from `center`, in a random direction.
std::vector<float> rotate_from(std::span<const float> center, double theta, Rng& rng);

/// Deterministic in (spec.seed); identities are seeded independently so the
/// corpus is stable under changes to `identities`.
PlantedCorpus generate_planted_corpus(const SynthCorpusSpec& spec);

/// Writes the on-disk layout consumed by the pipeline: <root>/<id>/NNN.png
/// placeholders, embeddings.emb1 (+ index), and ground_truth.json.
void write_planted_corpus(const PlantedCorpus& corpus, const std::filesystem::path& root,
                          int image_px);

} // namespace facepipe
