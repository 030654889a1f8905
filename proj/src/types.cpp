#include "facepipe/types.hpp"

#include <cctype>
#include <cmath>
#include <set>

#include "facepipe/errors.hpp"

namespace facepipe {

void EmbeddingMatrix::add_row(std::span<const float> values) {
    if (values.size() != dim_)
        throw ContractError("embedding row has wrong dimension");
    data_.insert(data_.end(), values.begin(), values.end());
}

void EmbeddingMatrix::l2_normalize_rows() {
    const std::size_t n = rows();
    for (std::size_t r = 0; r < n; ++r) {
        float* p = data_.data() + r * dim_;
        double ss = 0.0;
        for (std::uint32_t k = 0; k < dim_; ++k) ss += static_cast<double>(p[k]) * p[k];
        if (ss <= 0.0) continue;
        const double inv = 1.0 / std::sqrt(ss);
        for (std::uint32_t k = 0; k < dim_; ++k)
            p[k] = static_cast<float>(p[k] * inv);
    }
}

std::string to_string(Tier t) {
    return t == Tier::synthetic ? "synthetic" : "cleaned";
}

Tier tier_from_string(const std::string& s) {
    if (s == "synthetic") return Tier::synthetic;
    if (s == "cleaned") return Tier::cleaned;
    throw ContractError("unknown tier: " + s);
}

bool is_identity_id(const std::string& s) {
    if (s.size() != 6) return false;
    for (char c : s)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    return true;
}

std::string to_string(Verdict v) {
    return v == Verdict::kept ? "kept" : "discarded";
}

std::string to_string(Reason r) {
    switch (r) {
    case Reason::ok: return "ok";
    case Reason::below_fraction: return "below_fraction";
    case Reason::below_count: return "below_count";
    case Reason::calibration_failed: return "calibration_failed";
    }
    return "ok";
}

Verdict verdict_from_string(const std::string& s) {
    if (s == "kept") return Verdict::kept;
    if (s == "discarded") return Verdict::discarded;
    throw ContractError("unknown verdict: " + s);
}

Reason reason_from_string(const std::string& s) {
    if (s == "ok") return Reason::ok;
    if (s == "below_fraction") return Reason::below_fraction;
    if (s == "below_count") return Reason::below_count;
    if (s == "calibration_failed") return Reason::calibration_failed;
    throw ContractError("unknown reason: " + s);
}

std::vector<std::string> validate_manifest(const DatasetManifest& manifest,
                                           std::size_t images_per_identity) {
    std::vector<std::string> violations;
    bool seen_cleaned = false;
    std::set<std::string> ids;
    const ManifestEntry* prev = nullptr;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        const auto& e = manifest.entries[i];
        if (e.tier == Tier::cleaned) {
            seen_cleaned = true;
        } else if (seen_cleaned) {
            violations.push_back("entry " + e.identity_id +
                                 ": synthetic entries must precede cleaned entries");
        }
        if (e.image_paths.size() != images_per_identity) {
            violations.push_back("entry " + e.identity_id + ": has " +
                                 std::to_string(e.image_paths.size()) + " image paths, expected " +
                                 std::to_string(images_per_identity));
        }
        if (!is_identity_id(e.identity_id))
            violations.push_back("entry " + std::to_string(i) + ": malformed identity_id");
        if (!ids.insert(e.identity_id).second)
            violations.push_back("entry " + e.identity_id + ": duplicate identity_id");
        if (e.difficulty < 0.0 || !std::isfinite(e.difficulty))
            violations.push_back("entry " + e.identity_id + ": difficulty must be finite and >= 0");
        if (prev && prev->tier == e.tier && prev->difficulty > e.difficulty)
            violations.push_back("entry " + e.identity_id +
                                 ": difficulty decreases within its tier");
        prev = &e;
    }
    return violations;
}

} // namespace facepipe
