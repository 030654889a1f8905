#include "facepipe/llm_expert.hpp"

#include <cstdio>
#include <regex>

#include <opencv2/imgproc.hpp>

#include "facepipe/errors.hpp"
#include "facepipe/util.hpp"

namespace facepipe {

namespace {

// 5x7 digit glyphs, one byte per row, low 5 bits used.
constexpr std::uint8_t kDigitRows[10][7] = {
    {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}, // 0
    {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}, // 1
    {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}, // 2
    {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}, // 3
    {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}, // 4
    {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}, // 5
    {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}, // 6
    {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}, // 7
    {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}, // 8
    {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}, // 9
};

void draw_digit(Image& canvas, int digit, int x, int y, int scale) {
    for (int row = 0; row < 7; ++row) {
        for (int col = 0; col < 5; ++col) {
            if (!(kDigitRows[digit][row] & (1 << (4 - col)))) continue;
            cv::rectangle(canvas,
                          cv::Rect(x + col * scale, y + row * scale, scale, scale),
                          cv::Scalar(255, 255, 255), cv::FILLED);
        }
    }
}

void draw_label(Image& canvas, int value, int cell_x, int strip_y, int cell_w, int strip_h) {
    char text[8];
    std::snprintf(text, sizeof text, "%03d", value);
    const int scale = std::max(1, (strip_h - 4) / 7);
    const int glyph_w = 5 * scale;
    const int total_w = 3 * glyph_w + 2 * scale; // one scale unit between digits
    int x = cell_x + std::max(0, (cell_w - total_w) / 2);
    const int y = strip_y + std::max(0, (strip_h - 7 * scale) / 2);
    for (int i = 0; i < 3; ++i) {
        draw_digit(canvas, text[i] - '0', x, y, scale);
        x += glyph_w + scale;
    }
}

} // namespace

GridImage compose_grid(const std::vector<Image>& images, const GridSpec& spec) {
    const std::size_t n = images.size();
    if (n == 0) throw ContractError("compose_grid: no images");
    if (n > 999) throw ContractError("compose_grid: too many images for 3-digit labels");
    if (spec.columns < 1 || spec.cell_size < 8 || spec.label_height < 9)
        throw ContractError("compose_grid: invalid grid spec");

    GridImage out;
    out.columns = static_cast<int>(std::min<std::size_t>(n, static_cast<std::size_t>(spec.columns)));
    out.rows = static_cast<int>((n + out.columns - 1) / out.columns);
    const int cell_h = spec.cell_size + spec.label_height;
    out.composite = Image(out.rows * cell_h, out.columns * spec.cell_size, CV_8UC3,
                          cv::Scalar(0, 0, 0));

    for (std::size_t i = 0; i < n; ++i) {
        if (images[i].empty()) throw ContractError("compose_grid: empty image at index " +
                                                   std::to_string(i));
        const int r = static_cast<int>(i) / out.columns;
        const int c = static_cast<int>(i) % out.columns;
        cv::Mat cell;
        cv::resize(images[i], cell, cv::Size(spec.cell_size, spec.cell_size), 0, 0,
                   cv::INTER_LINEAR);
        cell.copyTo(out.composite(cv::Rect(c * spec.cell_size, r * cell_h,
                                           spec.cell_size, spec.cell_size)));
        draw_label(out.composite, static_cast<int>(i), c * spec.cell_size,
                   r * cell_h + spec.cell_size, spec.cell_size, spec.label_height);
    }
    return out;
}

std::string build_prompt() {
    return "You will receive an image consisting of several face photos arranged in a grid, "
           "where each face has a numeric ID label below it. Please identify all the face "
           "images that do not belong to the same person as the majority. Your answer should "
           "only include the numeric IDs of the outlier faces, separated by commas (e.g., "
           "001,005,012). Do not include any additional text, punctuation, or whitespace. "
           "Do not return an empty response.";
}

ParsedResponse parse_response(const std::string& text, std::size_t n) {
    if (n == 0) throw ContractError("parse_response: n must be >= 1");
    ParsedResponse out;
    static const std::regex grammar("^[0-9]{3}(,[0-9]{3})*$");
    if (!std::regex_match(text, grammar)) {
        out.error = "response does not match the index-list grammar";
        return out;
    }
    for (std::size_t pos = 0; pos < text.size(); pos += 4) {
        const int idx = (text[pos] - '0') * 100 + (text[pos + 1] - '0') * 10 +
                        (text[pos + 2] - '0');
        if (static_cast<std::size_t>(idx) >= n) {
            out.outliers.clear();
            out.error = "index " + text.substr(pos, 3) + " out of range for grid of " +
                        std::to_string(n);
            return out;
        }
        out.outliers.insert(idx);
    }
    out.ok = true;
    return out;
}

nlohmann::json transcript_to_json(const LlmTranscript& t) {
    nlohmann::json j{{"identity_id", t.identity_id},
                     {"prompt", t.prompt},
                     {"image_digest", t.image_digest},
                     {"response", t.response},
                     {"attempts", t.attempts},
                     {"parse_failed", t.parse_failed}};
    j["outliers"] = t.outliers;
    return j;
}

ConsultResult consult(const std::vector<Image>& images, LlmGateway& gateway,
                      const GridSpec& spec, int budget, const std::string& identity_id) {
    if (budget < 1) throw ContractError("consult: budget must be >= 1");

    const GridImage grid = compose_grid(images, spec);
    const std::vector<std::uint8_t> png = encode_png(grid.composite);

    ConsultResult out;
    out.verdict.source = ExpertVerdict::Source::llm;
    out.transcript.identity_id = identity_id;
    out.transcript.prompt = build_prompt();
    out.transcript.image_digest = to_hex(fnv1a64(png.data(), png.size()));
    out.transcript.parse_failed = true;

    for (int attempt = 0; attempt < budget; ++attempt) {
        out.transcript.attempts = attempt + 1;
        std::string response;
        try {
            response = gateway.complete(out.transcript.prompt, png);
        } catch (const TransportError&) {
            continue; // retry; transcript keeps the last delivered response
        }
        out.transcript.response = response;
        ParsedResponse parsed = parse_response(response, images.size());
        if (parsed.ok) {
            out.transcript.parse_failed = false;
            out.transcript.outliers = parsed.outliers;
            out.verdict.outliers = parsed.outliers;
            break;
        }
    }
    return out;
}

} // namespace facepipe
