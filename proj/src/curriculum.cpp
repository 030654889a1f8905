#include "facepipe/curriculum.hpp"

#include <algorithm>

#include "facepipe/cluster.hpp"
#include "facepipe/errors.hpp"

namespace facepipe {

std::vector<std::pair<std::string, std::size_t>> select_replacements(
    const std::vector<std::string>& discarded_ids,
    const std::vector<IdentityRecord>& pool, Rng& rng) {
    if (discarded_ids.size() > pool.size())
        throw ContractError("replacement pool too small: need " +
                            std::to_string(discarded_ids.size()) + " identities, pool has " +
                            std::to_string(pool.size()));

    // Partial Fisher-Yates over pool indices: uniform, without replacement.
    std::vector<std::size_t> idx(pool.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::vector<std::pair<std::string, std::size_t>> out;
    out.reserve(discarded_ids.size());
    for (std::size_t i = 0; i < discarded_ids.size(); ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
        std::swap(idx[i], idx[j]);
        out.emplace_back(discarded_ids[i], idx[i]);
    }
    return out;
}

double score_difficulty(const EmbeddingMatrix& matrix,
                        const std::vector<std::size_t>& rows,
                        const std::vector<std::size_t>& multiplicities) {
    if (rows.size() != multiplicities.size())
        throw ContractError("score_difficulty: rows and multiplicities differ in length");
    // Expand to a flat multiset of row indices; dispersion handles duplicates.
    std::vector<std::size_t> expanded;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (multiplicities[i] == 0)
            throw ContractError("score_difficulty: zero multiplicity");
        expanded.insert(expanded.end(), multiplicities[i], rows[i]);
    }
    return dispersion(matrix, expanded);
}

std::vector<std::size_t> replenish_multiplicities(std::size_t m, std::size_t target) {
    if (m == 0 || m > target)
        throw ContractError("replenish_multiplicities: kept count " + std::to_string(m) +
                            " outside [1, " + std::to_string(target) + "]");
    std::vector<std::size_t> mult(m, 1);
    const std::size_t need = target - m;
    for (std::size_t k = 0; k < need; ++k) mult[k % m] += 1;
    return mult;
}

DatasetManifest build_manifest(const std::vector<ScoredIdentity>& synthetic,
                               const std::vector<ScoredIdentity>& cleaned,
                               std::size_t images_per_identity) {
    auto by_difficulty = [](const ScoredIdentity& a, const ScoredIdentity& b) {
        if (a.difficulty != b.difficulty) return a.difficulty < b.difficulty;
        return a.identity_id < b.identity_id;
    };

    DatasetManifest manifest;
    auto append = [&](std::vector<ScoredIdentity> tier_entries, Tier tier) {
        std::sort(tier_entries.begin(), tier_entries.end(), by_difficulty);
        for (ScoredIdentity& s : tier_entries) {
            ManifestEntry e;
            e.identity_id = std::move(s.identity_id);
            e.tier = tier;
            e.difficulty = s.difficulty;
            e.image_paths = std::move(s.image_paths);
            manifest.entries.push_back(std::move(e));
        }
    };
    append(synthetic, Tier::synthetic);
    append(cleaned, Tier::cleaned);

    const std::vector<std::string> violations = validate_manifest(manifest, images_per_identity);
    if (!violations.empty())
        throw ContractError("manifest invalid: " + violations.front() + " (and " +
                            std::to_string(violations.size() - 1) + " more)");
    return manifest;
}

} // namespace facepipe
