#pragma once

#include <string>
#include <vector>

#include "facepipe/rng.hpp"
#include "facepipe/types.hpp"

namespace facepipe {

/// Pairs each discarded identity with a distinct pool identity, sampled
/// uniformly without replacement. Throws when the pool is too small.
std::vector<std::pair<std::string, std::size_t>> select_replacements(
    const std::vector<std::string>& discarded_ids,
    const std::vector<IdentityRecord>& pool, Rng& rng);

/// Embedding dispersion of the identity's final image group. `multiplicities`
/// gives how many final images each embedding row stands for (originals count
/// once; a row used as an augmentation source counts once per derived image
/// plus once for itself).
double score_difficulty(const EmbeddingMatrix& matrix,
                        const std::vector<std::size_t>& rows,
                        const std::vector<std::size_t>& multiplicities);

/// Multiplicity vector for a kept set of size m replenished round-robin up to
/// target images.
std::vector<std::size_t> replenish_multiplicities(std::size_t m, std::size_t target);

/// An identity ready for manifest placement.
struct ScoredIdentity {
    std::string identity_id;
    double difficulty = 0.0;
    std::vector<std::string> image_paths;
};

/// Synthetic entries first, then cleaned; each tier sorted by ascending
/// difficulty (ties by identity_id). The result is validated before return.
DatasetManifest build_manifest(const std::vector<ScoredIdentity>& synthetic,
                               const std::vector<ScoredIdentity>& cleaned,
                               std::size_t images_per_identity = 50);

} // namespace facepipe
