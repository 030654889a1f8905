#include "facepipe/generator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <json.hpp>

#include "facepipe/embed_io.hpp"
#include "facepipe/errors.hpp"
#include "facepipe/json_io.hpp"
#include "facepipe/util.hpp"

namespace facepipe {

namespace {

template <typename Fn>
auto with_transport_retries(int budget, Fn&& fn) {
    const int attempts = std::max(1, budget);
    for (int i = 0;; ++i) {
        try {
            return fn();
        } catch (const TransportError&) {
            if (i + 1 >= attempts) throw;
        }
    }
}

std::size_t saturating_mul(std::size_t a, std::size_t b) {
    if (a != 0 && b > std::numeric_limits<std::size_t>::max() / a)
        return std::numeric_limits<std::size_t>::max();
    return a * b;
}

} // namespace

PromptSpec compose_prompt(const PromptSettings& settings, Rng& rng) {
    if (settings.bases.empty()) throw ContractError("prompt settings: no base descriptions");
    PromptSpec spec;
    spec.base = settings.bases[rng.below(settings.bases.size())];
    spec.text = spec.base;
    for (const std::string& attr : PromptSettings::attribute_order()) {
        auto it = settings.attributes.find(attr);
        if (it == settings.attributes.end() || it->second.empty())
            throw ContractError("prompt settings: attribute '" + attr + "' has no options");
        const std::string& phrase = it->second[rng.below(it->second.size())];
        spec.choices[attr] = phrase;
        spec.text += ", " + phrase;
    }
    return spec;
}

PromptSampler::PromptSampler(PromptSettings settings, Rng rng)
    : settings_(std::move(settings)), rng_(rng) {
    space_size_ = settings_.bases.size();
    for (const std::string& attr : PromptSettings::attribute_order()) {
        auto it = settings_.attributes.find(attr);
        const std::size_t options = it == settings_.attributes.end() ? 0 : it->second.size();
        space_size_ = saturating_mul(space_size_, options);
    }
}

PromptSpec PromptSampler::next() {
    PromptSpec spec = compose_prompt(settings_, rng_);
    if (seen_.size() >= space_size_) return spec; // space exhausted; repeats allowed
    for (int retry = 0; retry < settings_.uniqueness_retries; ++retry) {
        if (seen_.insert(fnv1a64(spec.text)).second) return spec;
        spec = compose_prompt(settings_, rng_);
    }
    seen_.insert(fnv1a64(spec.text));
    return spec;
}

std::optional<Image> gate_face(const Image& image, DetectorClient& detector, int retry_budget) {
    const std::vector<std::uint8_t> png = encode_png(image);
    const std::vector<FaceBox> boxes = with_transport_retries(
        retry_budget, [&] { return detector.detect(std::span<const std::uint8_t>(png)); });
    if (boxes.empty()) return std::nullopt;

    const FaceBox* best = nullptr;
    long long best_area = -1;
    for (const FaceBox& b : boxes) {
        if (b.width <= 0 || b.height <= 0 || b.x < 0 || b.y < 0 || b.x + b.width > image.cols ||
            b.y + b.height > image.rows)
            throw ContractError("detector returned an out-of-bounds face box");
        const long long area = static_cast<long long>(b.width) * b.height;
        if (!best || area > best_area ||
            (area == best_area && (b.confidence > best->confidence ||
                                   (b.confidence == best->confidence &&
                                    (b.x < best->x || (b.x == best->x && b.y < best->y)))))) {
            best = &b;
            best_area = area;
        }
    }
    return image(cv::Rect(best->x, best->y, best->width, best->height)).clone();
}

std::vector<std::vector<std::uint8_t>> expand_identity(const std::vector<std::uint8_t>& image_png,
                                                       ExpanderClient& expander, int count,
                                                       int retry_budget) {
    if (count < 0) throw ContractError("expand_identity: negative count");
    auto variants = with_transport_retries(retry_budget, [&] {
        return expander.expand(std::span<const std::uint8_t>(image_png), count);
    });
    if (variants.size() != static_cast<std::size_t>(count))
        throw ContractError("expander protocol error: requested " + std::to_string(count) +
                            " variants, got " + std::to_string(variants.size()));
    return variants;
}

std::vector<std::string> mint_identity_ids(const std::set<std::string>& existing,
                                           std::size_t count) {
    std::vector<std::string> out;
    out.reserve(count);
    for (int v = 0; v < 1000000 && out.size() < count; ++v) {
        char id[16];
        std::snprintf(id, sizeof id, "%06d", v);
        if (!existing.count(id)) out.emplace_back(id);
    }
    if (out.size() < count)
        throw ContractError("identity id space exhausted: need " + std::to_string(count) +
                            " fresh ids");
    return out;
}

std::vector<float> embed_image_bytes(std::span<const std::uint8_t> bytes, std::uint32_t dim) {
    if (dim == 0) throw ContractError("embed_image_bytes: dim must be >= 1");
    Rng rng(fnv1a64(bytes.data(), bytes.size()));
    std::vector<float> v(dim);
    double norm_sq = 0.0;
    for (std::uint32_t i = 0; i < dim; ++i) {
        v[i] = static_cast<float>(rng.gaussian());
        norm_sq += static_cast<double>(v[i]) * v[i];
    }
    if (norm_sq <= 0.0) {
        v[0] = 1.0f;
        return v;
    }
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (float& x : v) x = static_cast<float>(x * inv);
    return v;
}

GenerateSummary generate_corpus(const GenerateClients& clients, const PipelineConfig& config,
                                std::size_t count, const std::filesystem::path& out_root,
                                std::uint64_t seed) {
    if (!clients.generator || !clients.expander || !clients.detector)
        throw ContractError("generate_corpus: all three clients are required");

    std::filesystem::create_directories(out_root);
    std::set<std::string> existing;
    for (const auto& entry : std::filesystem::directory_iterator(out_root))
        if (entry.is_directory() && is_identity_id(entry.path().filename().string()))
            existing.insert(entry.path().filename().string());

    PromptSampler sampler(config.prompts, Rng(derive_seed(seed, "prompt-sampler")));
    GenerateSummary summary;
    std::vector<std::pair<std::string, PromptSpec>> log_entries;

    for (std::size_t i = 0; i < count; ++i) {
        try {
            std::optional<Image> face;
            PromptSpec prompt;
            for (int attempt = 0; attempt < std::max(1, config.generate.gate_attempts);
                 ++attempt) {
                prompt = sampler.next();
                const std::vector<std::uint8_t> png = with_transport_retries(
                    config.generator.retry_budget,
                    [&] { return clients.generator->generate(prompt.text); });
                face = gate_face(decode_image(png), *clients.detector,
                                 config.detector.retry_budget);
                if (face) break;
            }
            if (!face) {
                summary.skipped += 1;
                std::fprintf(stderr, "warning: no face passed the gate after %d prompts; "
                                     "skipping one identity\n",
                             std::max(1, config.generate.gate_attempts));
                continue;
            }

            const std::vector<std::uint8_t> face_png = encode_png(*face);
            const auto variants = expand_identity(face_png, *clients.expander,
                                                  config.generate.expand_count,
                                                  config.expander.retry_budget);

            const std::string id = mint_identity_ids(existing, 1)[0];
            existing.insert(id);
            const std::filesystem::path dir = out_root / id;
            std::filesystem::create_directories(dir);
            write_file_bytes(dir / "000.png", face_png);
            for (std::size_t v = 0; v < variants.size(); ++v) {
                const std::string ext = sniff_image_format(variants[v]);
                char name[32];
                std::snprintf(name, sizeof name, "%03zu.%s", v + 1,
                              ext == "jpeg" ? "jpg" : "png");
                write_file_bytes(dir / name, variants[v]);
            }
            summary.generated_ids.push_back(id);
            log_entries.emplace_back(id, prompt);
        } catch (const TransportError& e) {
            summary.skipped += 1;
            std::fprintf(stderr, "warning: transport failure, skipping one identity: %s\n",
                         e.what());
        }
    }

    // One embedding file spanning every identity directory now present.
    const std::size_t cap = std::max<std::size_t>(
        50, static_cast<std::size_t>(config.generate.expand_count) + 1);
    ScanResult scan = scan_dataset(out_root, cap);
    EmbeddingMatrix matrix(config.generate.embed_dim);
    RowIndex index;
    for (const IdentityRecord& rec : scan.records) {
        for (const ImageRef& ref : rec.images) {
            const auto bytes = read_file_bytes(out_root / rec.identity_id / ref.filename);
            matrix.add_row(embed_image_bytes(std::span<const std::uint8_t>(bytes),
                                             config.generate.embed_dim));
            index[rec.identity_id + "/" + ref.filename] = matrix.rows() - 1;
        }
    }
    write_embeddings(out_root / "embeddings.emb1", matrix, index);

    std::sort(log_entries.begin(), log_entries.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::string log_text;
    for (const auto& [id, prompt] : log_entries) {
        nlohmann::json j{{"identity_id", id}, {"prompt", prompt.text}};
        j["base"] = prompt.base;
        j["choices"] = prompt.choices;
        log_text += dump_canonical(j);
    }
    write_file_text(out_root / "generation_log.jsonl", log_text);
    return summary;
}

} // namespace facepipe
