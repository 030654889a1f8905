#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "facepipe/clients.hpp"
#include "facepipe/config.hpp"
#include "facepipe/image.hpp"

namespace facepipe {

/// Square cells in row-major order, each with a 3-digit index label rendered
/// beneath it. Width adapts to the image count when fewer than a full row.
struct GridImage {
    Image composite;
    int rows = 0;
    int columns = 0;
};

GridImage compose_grid(const std::vector<Image>& images, const GridSpec& spec);

/// Instruction sent alongside the composite; fixed text, grid-size agnostic.
std::string build_prompt();

struct ParsedResponse {
    bool ok = false;
    std::set<int> outliers; // duplicates collapse
    std::string error;
};

/// Accepts exactly comma-separated 3-digit indices (e.g. "001,005,012"),
/// each below n. Anything else -- empty text, whitespace, trailing comma,
/// out-of-range index -- is a parse failure.
ParsedResponse parse_response(const std::string& text, std::size_t n);

/// Outlier indices proposed by one expert.
struct ExpertVerdict {
    enum class Source { cluster, llm };
    Source source = Source::cluster;
    std::set<int> outliers;
};

/// Everything needed to audit or replay one consultation.
struct LlmTranscript {
    std::string identity_id;
    std::string prompt;
    std::string image_digest; // FNV-1a of the composite PNG
    std::string response;     // verbatim; empty when transport never delivered
    int attempts = 0;
    bool parse_failed = false;
    std::set<int> outliers;
};

nlohmann::json transcript_to_json(const LlmTranscript& t);

struct ConsultResult {
    ExpertVerdict verdict; // empty outliers when every attempt failed
    LlmTranscript transcript;
};

/// Composes the grid once, then asks the model up to `budget` times until a
/// response parses. Transport and grammar failures are consumed here; the
/// caller always gets a result (possibly an empty verdict with the failure
/// flagged in the transcript).
ConsultResult consult(const std::vector<Image>& images, LlmGateway& gateway,
                      const GridSpec& spec, int budget, const std::string& identity_id);

} // namespace facepipe
