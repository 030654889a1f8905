#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "facepipe/config.hpp"
#include "facepipe/image.hpp"
#include "facepipe/rng.hpp"

namespace facepipe {

enum class AugKind {
    hflip,
    color_jitter,
    grayscale,
    affine,
    rotate,
    gaussian_blur,
    low_resolution,
};

/// Fixed application order; sampling draws in this order too.
const std::vector<AugKind>& augmentation_order();

std::string to_string(AugKind k);
AugKind aug_kind_from_string(const std::string& s);

/// One op in a recipe. Parameters are recorded only when the op applies, and
/// they fully determine the transform -- replaying a recipe never consults an
/// RNG.
struct AugStep {
    AugKind kind = AugKind::hflip;
    bool applied = false;
    std::map<std::string, double> params;
};

struct AugmentRecipe {
    int source_index = 0;        // position in the kept list
    std::string source_file;     // filename inside the identity directory
    std::string output_file;     // aug_0000.png, aug_0001.png, ...
    std::vector<AugStep> steps;
};

nlohmann::json recipe_to_json(const AugmentRecipe& r);
AugmentRecipe recipe_from_json(const nlohmann::json& j);

/// Draws applied-flags and parameters for every op, in the fixed order.
std::vector<AugStep> sample_steps(Rng& rng, const AugmentConfig& config);

/// Pure function of (input, recipe); the entry point for replay.
Image apply_recipe(const Image& input, const AugmentRecipe& recipe);

/// Plans the images needed to bring an identity from `kept` files up to the
/// target count. Sources rotate round-robin through the kept list; the RNG is
/// seeded from (seed, identity_id) so identities are independent and the
/// plan does not depend on what other identities need.
std::vector<AugmentRecipe> plan_replenishment(const std::vector<std::string>& kept_files,
                                              const AugmentConfig& config,
                                              std::uint64_t seed,
                                              const std::string& identity_id);

/// Runs a plan against <root>/<identity_id>/, writing PNG outputs. Returns
/// the number of files written. Existing outputs are overwritten (reruns
/// converge to the same bytes).
std::size_t execute_plan(const std::filesystem::path& root, const std::string& identity_id,
                         const std::vector<AugmentRecipe>& recipes);

} // namespace facepipe
