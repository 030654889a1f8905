#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "facepipe/clients.hpp"
#include "facepipe/config.hpp"
#include "facepipe/image.hpp"
#include "facepipe/rng.hpp"
#include "facepipe/types.hpp"

namespace facepipe {

/// A composed text prompt plus the choices that produced it.
struct PromptSpec {
    std::string base;
    std::map<std::string, std::string> choices; // attribute -> chosen phrase
    std::string text;
};

/// base + ", " + attribute phrases in the fixed attribute order.
PromptSpec compose_prompt(const PromptSettings& settings, Rng& rng);

/// Draws prompts and retries (bounded) until the text has not been seen
/// before; falls back to a repeat when the combinatorial space or the retry
/// budget runs out.
class PromptSampler {
public:
    PromptSampler(PromptSettings settings, Rng rng);
    PromptSpec next();

private:
    PromptSettings settings_;
    Rng rng_;
    std::unordered_set<std::uint64_t> seen_;
    std::size_t space_size_;
};

/// Detects faces (with transport retries) and returns the winning crop, or
/// nothing when the detector reports no face. Largest box wins; ties go to
/// higher confidence, then to the leftmost box.
std::optional<Image> gate_face(const Image& image, DetectorClient& detector, int retry_budget);

/// Asks the expander for exactly `count` variants of the reference image.
/// A count mismatch is a protocol violation.
std::vector<std::vector<std::uint8_t>> expand_identity(const std::vector<std::uint8_t>& image_png,
                                                       ExpanderClient& expander, int count,
                                                       int retry_budget);

/// Lowest `count` six-digit ids not present in `existing`, ascending.
std::vector<std::string> mint_identity_ids(const std::set<std::string>& existing,
                                           std::size_t count);

/// Embedding stand-in used when no face-recognition model is wired up:
/// a unit vector seeded by the image bytes. Identical bytes, identical
/// embedding.
std::vector<float> embed_image_bytes(std::span<const std::uint8_t> bytes, std::uint32_t dim);

struct GenerateClients {
    GeneratorClient* generator = nullptr;
    ExpanderClient* expander = nullptr;
    DetectorClient* detector = nullptr;
};

struct GenerateSummary {
    std::vector<std::string> generated_ids;
    std::size_t skipped = 0; // prompts whose images never passed the face gate
};

/// Builds `count` synthetic identities under out_root: a reference image that
/// passed the face gate plus expand_count variants, then one embedding file
/// covering every identity directory present. Ids extend whatever already
/// exists under out_root.
GenerateSummary generate_corpus(const GenerateClients& clients, const PipelineConfig& config,
                                std::size_t count, const std::filesystem::path& out_root,
                                std::uint64_t seed);

} // namespace facepipe
