#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace facepipe {

/// Cleaning parameters. Defaults follow the published recipe: similarity
/// threshold calibrated over [0.3, 0.9] so the largest cluster holds 50-80%
/// of an identity's images; identities keeping under 20% of their originals
/// or fewer than 10 images are discarded.
struct CleanConfig {
    double sim_lo = 0.3;
    double sim_hi = 0.9;
    double band_lo = 0.50;
    double band_hi = 0.80;
    double min_keep_fraction = 0.20;
    int min_keep_count = 10;
    int min_pts = 3;       // DBSCAN core-point threshold, neighbors incl. self
    double tau_step = 0.05; // calibration grid step
};

/// Returns every violated invariant as a short relation string; empty = ok.
std::vector<std::string> validate_config(const CleanConfig& config);

/// Offline augmentation pipeline parameters. Op order is fixed: hflip,
/// color_jitter, grayscale, affine, rotate, gaussian_blur, low_resolution.
struct AugmentConfig {
    double p_hflip = 0.5;
    double p_jitter = 0.8;
    double jitter_brightness_lo = 0.8, jitter_brightness_hi = 1.2;
    double jitter_contrast_lo = 0.8, jitter_contrast_hi = 1.2;
    double jitter_saturation_lo = 0.8, jitter_saturation_hi = 1.2;
    double jitter_hue_lo = -0.05, jitter_hue_hi = 0.05;
    double p_gray = 0.2;
    double p_affine = 0.5;
    double affine_max_rot_deg = 10.0;
    double affine_max_translate = 0.05;
    double affine_scale_lo = 0.95, affine_scale_hi = 1.05;
    double affine_max_shear_deg = 5.0;
    double p_rot = 0.5;
    double rot_max_deg = 5.0;
    double p_blur = 1.0; // sigma near 0.1 is almost the identity, so always on
    int blur_kernel = 3;
    double blur_sigma_lo = 0.1, blur_sigma_hi = 2.0;
    double p_lowres = 0.5;
    double lowres_factor = 0.5;
    int target_count = 50; // images per identity after replenishment
};

/// Grid geometry for the composite validation image. Each face occupies a
/// cell_size square with a 3-digit label strip below it.
struct GridSpec {
    int cell_size = 112;
    int columns = 10;
    int label_height = 20;
};

/// LLM validation client settings. kind: "none", "mock", "http", or
/// "replay". Credentials come from the environment, never from the file.
struct LlmSettings {
    std::string kind = "none";
    std::vector<std::string> mock_responses = {""};
    std::string endpoint = "http://127.0.0.1:8080";
    std::string path = "/v1/complete";
    std::string model = "gpt-4o";
    std::string api_key_env = "FACEPIPE_LLM_API_KEY";
    std::string replay_file;
    int budget = 3;            // consult attempts (parse/transport retries)
    double rate_per_sec = 0.0; // token bucket; <= 0 disables throttling
    int burst = 1;
};

/// Generator / expander / detector client settings. kind: "mock" or "http".
struct AdapterSettings {
    std::string kind = "mock";
    std::string endpoint = "http://127.0.0.1:8080";
    std::string path;
    std::string api_key_env;
    std::string mock_mode = "accept"; // detector mock: "accept" or "reject"
    int retry_budget = 3;
    double rate_per_sec = 0.0;
};

struct LeakSettings {
    double tau_leak = 0.7;
};

/// Prompt composition material: base descriptions plus per-attribute option
/// lists. Attribute order is fixed and part of the output contract.
struct PromptSettings {
    std::vector<std::string> bases;
    std::map<std::string, std::vector<std::string>> attributes;
    int uniqueness_retries = 64;

    static const std::vector<std::string>& attribute_order();
    static PromptSettings defaults();
};

struct GenerateSettings {
    int expand_count = 49;  // variants per reference image
    int gate_attempts = 5;  // fresh prompts tried before skipping an identity
    std::uint32_t embed_dim = 512;
};

struct PipelineConfig {
    CleanConfig clean;
    AugmentConfig augment;
    GridSpec grid;
    LlmSettings llm;
    AdapterSettings generator;
    AdapterSettings expander;
    AdapterSettings detector;
    LeakSettings leak;
    PromptSettings prompts = PromptSettings::defaults();
    GenerateSettings generate;
};

/// Loads a pipeline config JSON file; absent keys keep their defaults.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

} // namespace facepipe
