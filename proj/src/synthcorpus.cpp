#include "facepipe/synthcorpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "facepipe/errors.hpp"
#include "facepipe/image.hpp"
#include "facepipe/json_io.hpp"
#include "facepipe/util.hpp"

namespace facepipe {

namespace {

double parse_percent(const std::string& part, const std::string& suffix) {
    const std::string tail = "%@" + suffix;
    if (part.size() <= tail.size() || part.substr(part.size() - tail.size()) != tail)
        throw ContractError("bad contamination part: '" + part + "'");
    const std::string number = part.substr(0, part.size() - tail.size());
    std::size_t used = 0;
    double pct = 0.0;
    try {
        pct = std::stod(number, &used);
    } catch (const std::exception&) {
        throw ContractError("bad contamination percentage: '" + part + "'");
    }
    if (used != number.size() || pct < 0.0 || pct > 100.0)
        throw ContractError("contamination percentage out of range: '" + part + "'");
    return pct / 100.0;
}

} // namespace

ContaminationSpec ContaminationSpec::parse(const std::string& text) {
    ContaminationSpec spec;
    if (text.empty()) return spec;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = text.find(',', start);
        const std::string part =
            text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (part.find("@noise") != std::string::npos)
            spec.noise_frac = parse_percent(part, "noise");
        else if (part.find("@cross") != std::string::npos)
            spec.cross_frac = parse_percent(part, "cross");
        else
            throw ContractError("bad contamination part: '" + part + "'");
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (spec.noise_frac + spec.cross_frac > 1.0)
        throw ContractError("contamination fractions sum above 100%");
    return spec;
}

std::string to_string(PlantKind k) {
    switch (k) {
    case PlantKind::clean: return "clean";
    case PlantKind::noise: return "noise";
    case PlantKind::cross: return "cross";
    }
    return "clean";
}

std::vector<float> random_unit(Rng& rng, std::uint32_t dim) {
    std::vector<float> v(dim);
    double norm_sq = 0.0;
    do {
        norm_sq = 0.0;
        for (std::uint32_t i = 0; i < dim; ++i) {
            v[i] = static_cast<float>(rng.gaussian());
            norm_sq += static_cast<double>(v[i]) * v[i];
        }
    } while (norm_sq <= 0.0);
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (float& x : v) x = static_cast<float>(x * inv);
    return v;
}

std::vector<float> rotate_from(std::span<const float> center, double theta, Rng& rng) {
    const std::uint32_t dim = static_cast<std::uint32_t>(center.size());
    if (dim < 2) throw ContractError("rotate_from needs dim >= 2");

    // Gram-Schmidt a random direction against the center to get the rotation
    // plane; resample in the (measure-zero) parallel case.
    std::vector<double> u(dim);
    double norm_sq = 0.0;
    while (norm_sq <= 1e-12) {
        std::vector<float> g = random_unit(rng, dim);
        double dot = 0.0;
        for (std::uint32_t i = 0; i < dim; ++i) dot += static_cast<double>(g[i]) * center[i];
        norm_sq = 0.0;
        for (std::uint32_t i = 0; i < dim; ++i) {
            u[i] = static_cast<double>(g[i]) - dot * center[i];
            norm_sq += u[i] * u[i];
        }
    }
    const double inv = 1.0 / std::sqrt(norm_sq);
    const double c = std::cos(theta), s = std::sin(theta);

    std::vector<float> out(dim);
    double out_norm_sq = 0.0;
    for (std::uint32_t i = 0; i < dim; ++i) {
        const double val = c * center[i] + s * u[i] * inv;
        out[i] = static_cast<float>(val);
        out_norm_sq += val * val;
    }
    const double out_inv = 1.0 / std::sqrt(out_norm_sq);
    for (float& x : out) x = static_cast<float>(x * out_inv);
    return out;
}

PlantedCorpus generate_planted_corpus(const SynthCorpusSpec& spec) {
    if (spec.identities == 0 || spec.images_per == 0)
        throw ContractError("planted corpus needs at least one identity and image");
    if (spec.dim < 2) throw ContractError("planted corpus needs dim >= 2");
    if (spec.identities > 1000000) throw ContractError("too many identities for 6-digit ids");

    std::vector<std::string> ids(spec.identities);
    for (std::size_t i = 0; i < spec.identities; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%06zu", i);
        ids[i] = buf;
    }

    // Pass 1: centroids, from a stream independent of the image draws.
    std::vector<std::vector<float>> centroids(spec.identities);
    for (std::size_t i = 0; i < spec.identities; ++i) {
        Rng rng(derive_seed(spec.seed, ids[i] + "/centroid"));
        centroids[i] = random_unit(rng, spec.dim);
    }

    PlantedCorpus corpus;
    corpus.matrix = EmbeddingMatrix(spec.dim);
    corpus.matrix.reserve_rows(spec.identities * spec.images_per);

    const std::size_t n = spec.images_per;
    std::size_t n_noise = static_cast<std::size_t>(
        std::llround(spec.contamination.noise_frac * static_cast<double>(n)));
    std::size_t n_cross = static_cast<std::size_t>(
        std::llround(spec.contamination.cross_frac * static_cast<double>(n)));
    if (n_noise + n_cross > n) n_cross = n - n_noise;

    for (std::size_t i = 0; i < spec.identities; ++i) {
        Rng rng(derive_seed(spec.seed, ids[i] + "/images"));

        // Contaminated positions: a random prefix of a shuffled index list.
        std::vector<std::size_t> positions(n);
        for (std::size_t k = 0; k < n; ++k) positions[k] = k;
        for (std::size_t k = 0; k + 1 < n; ++k) {
            const std::size_t j = k + static_cast<std::size_t>(rng.below(n - k));
            std::swap(positions[k], positions[j]);
        }

        PlantedIdentityTruth truth;
        truth.kinds.assign(n, PlantKind::clean);
        for (std::size_t k = 0; k < n_noise; ++k) truth.kinds[positions[k]] = PlantKind::noise;
        for (std::size_t k = 0; k < n_cross; ++k)
            truth.kinds[positions[n_noise + k]] = PlantKind::cross;

        IdentityRecord record;
        record.identity_id = ids[i];
        record.tier = Tier::cleaned;
        for (std::size_t k = 0; k < n; ++k) {
            char name[32];
            std::snprintf(name, sizeof name, "%03zu.png", k);
            record.images.push_back(ImageRef{name});

            std::vector<float> point;
            switch (truth.kinds[k]) {
            case PlantKind::clean:
                point = rotate_from(centroids[i], spec.sigma_a * std::abs(rng.gaussian()), rng);
                break;
            case PlantKind::noise:
                point = random_unit(rng, spec.dim);
                truth.outliers.insert(static_cast<int>(k));
                break;
            case PlantKind::cross: {
                // Near another identity's centroid (needs >= 2 identities).
                std::size_t other = i;
                if (spec.identities > 1)
                    other = (i + 1 + static_cast<std::size_t>(
                                         rng.below(spec.identities - 1))) %
                            spec.identities;
                point = rotate_from(centroids[other],
                                    spec.sigma_a * std::abs(rng.gaussian()), rng);
                truth.outliers.insert(static_cast<int>(k));
                break;
            }
            }
            corpus.matrix.add_row(point);
            const std::size_t row = corpus.matrix.rows() - 1;
            record.embedding_rows.push_back(row);
            corpus.index[ids[i] + "/" + record.images.back().filename] = row;
        }
        corpus.records.push_back(std::move(record));
        corpus.truth[ids[i]] = std::move(truth);
    }
    return corpus;
}

void write_planted_corpus(const PlantedCorpus& corpus, const std::filesystem::path& root,
                          int image_px) {
    if (image_px < 1) throw ContractError("image_px must be >= 1");
    std::filesystem::create_directories(root);

    for (std::size_t i = 0; i < corpus.records.size(); ++i) {
        const IdentityRecord& rec = corpus.records[i];
        const std::filesystem::path dir = root / rec.identity_id;
        std::filesystem::create_directories(dir);
        // One encoded placeholder per identity, reused for all its images.
        const std::uint64_t h = fnv1a64(rec.identity_id);
        const auto png = encode_png(solid_color_image(
            image_px, image_px, static_cast<std::uint8_t>(h & 0xFF),
            static_cast<std::uint8_t>((h >> 8) & 0xFF),
            static_cast<std::uint8_t>((h >> 16) & 0xFF)));
        for (const ImageRef& ref : rec.images) write_file_bytes(dir / ref.filename, png);
    }

    write_embeddings(root / "embeddings.emb1", corpus.matrix, corpus.index);

    nlohmann::json identities = nlohmann::json::object();
    for (const auto& [id, truth] : corpus.truth) {
        nlohmann::json kinds = nlohmann::json::array();
        for (PlantKind k : truth.kinds) kinds.push_back(to_string(k));
        identities[id] = {{"kinds", kinds}, {"outliers", truth.outliers}};
    }
    nlohmann::json j;
    j["version"] = 1;
    j["identities"] = identities;
    write_file_text(root / "ground_truth.json", dump_canonical(j));
}

} // namespace facepipe
