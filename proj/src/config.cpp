#include "facepipe/config.hpp"

#include <fstream>

#include <json.hpp>

#include "facepipe/errors.hpp"

namespace facepipe {

std::vector<std::string> validate_config(const CleanConfig& c) {
    std::vector<std::string> v;
    if (!(c.sim_lo > 0.0)) v.push_back("sim_lo > 0");
    if (!(c.sim_lo < c.sim_hi)) v.push_back("sim_lo < sim_hi");
    if (!(c.sim_hi < 1.0)) v.push_back("sim_hi < 1");
    if (!(c.band_lo > 0.0)) v.push_back("band_lo > 0");
    if (!(c.band_lo < c.band_hi)) v.push_back("band_lo < band_hi");
    if (!(c.band_hi <= 1.0)) v.push_back("band_hi <= 1");
    if (!(c.min_keep_count >= 1)) v.push_back("min_keep_count >= 1");
    if (!(c.min_keep_fraction >= 0.0 && c.min_keep_fraction <= 1.0))
        v.push_back("min_keep_fraction in [0, 1]");
    if (!(c.min_pts >= 1)) v.push_back("min_pts >= 1");
    if (!(c.tau_step > 0.0)) v.push_back("tau_step > 0");
    return v;
}

const std::vector<std::string>& PromptSettings::attribute_order() {
    static const std::vector<std::string> order = {
        "head_pose", "expression", "lighting", "camera_angle", "background", "accessory",
    };
    return order;
}

PromptSettings PromptSettings::defaults() {
    PromptSettings p;
    p.bases = {
        "a young adult with short dark hair and a defined jawline",
        "a middle-aged person with curly brown hair and round cheeks",
        "an elderly person with thin gray hair and deep-set eyes",
        "a person in their twenties with a narrow face and long straight hair",
        "a person in their thirties with a broad face and cropped blond hair",
        "a teenager with freckles and shoulder-length wavy hair",
        "a person in their forties with a short beard and receding hairline",
        "a person with high cheekbones and a shaved head",
        "a person in their fifties with glasses and neatly combed silver hair",
        "a young person with a round face and a dark buzz cut",
        "a person with an angular face, thick eyebrows and a small mustache",
        "a person in their sixties with laugh lines and a side-parted bob",
    };
    p.attributes = {
        {"head_pose",
         {"facing forward", "facing left", "facing right", "tilted right", "tilted left"}},
        {"expression",
         {"slight smile", "serious look", "neutral expression", "broad smile", "raised eyebrows"}},
        {"lighting",
         {"under natural daylight", "lit by a soft lamp", "in diffuse studio light",
          "in warm evening light", "under cool overcast light"}},
        {"camera_angle",
         {"shot at eye level", "shot from slightly above", "shot from slightly below"}},
        {"background",
         {"plain light background", "plain dark background", "blurred indoor background",
          "blurred outdoor background"}},
        {"accessory",
         {"no accessories", "wearing thin-framed glasses", "wearing small earrings",
          "wearing a plain scarf"}},
    };
    return p;
}

namespace {

template <typename T>
void get_to_if(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) j.at(key).get_to(out);
}

void load_clean(const nlohmann::json& j, CleanConfig& c) {
    get_to_if(j, "sim_lo", c.sim_lo);
    get_to_if(j, "sim_hi", c.sim_hi);
    get_to_if(j, "band_lo", c.band_lo);
    get_to_if(j, "band_hi", c.band_hi);
    get_to_if(j, "min_keep_fraction", c.min_keep_fraction);
    get_to_if(j, "min_keep_count", c.min_keep_count);
    get_to_if(j, "min_pts", c.min_pts);
    get_to_if(j, "tau_step", c.tau_step);
}

void load_augment(const nlohmann::json& j, AugmentConfig& a) {
    get_to_if(j, "p_hflip", a.p_hflip);
    get_to_if(j, "p_jitter", a.p_jitter);
    get_to_if(j, "jitter_brightness_lo", a.jitter_brightness_lo);
    get_to_if(j, "jitter_brightness_hi", a.jitter_brightness_hi);
    get_to_if(j, "jitter_contrast_lo", a.jitter_contrast_lo);
    get_to_if(j, "jitter_contrast_hi", a.jitter_contrast_hi);
    get_to_if(j, "jitter_saturation_lo", a.jitter_saturation_lo);
    get_to_if(j, "jitter_saturation_hi", a.jitter_saturation_hi);
    get_to_if(j, "jitter_hue_lo", a.jitter_hue_lo);
    get_to_if(j, "jitter_hue_hi", a.jitter_hue_hi);
    get_to_if(j, "p_gray", a.p_gray);
    get_to_if(j, "p_affine", a.p_affine);
    get_to_if(j, "affine_max_rot_deg", a.affine_max_rot_deg);
    get_to_if(j, "affine_max_translate", a.affine_max_translate);
    get_to_if(j, "affine_scale_lo", a.affine_scale_lo);
    get_to_if(j, "affine_scale_hi", a.affine_scale_hi);
    get_to_if(j, "affine_max_shear_deg", a.affine_max_shear_deg);
    get_to_if(j, "p_rot", a.p_rot);
    get_to_if(j, "rot_max_deg", a.rot_max_deg);
    get_to_if(j, "p_blur", a.p_blur);
    get_to_if(j, "blur_kernel", a.blur_kernel);
    get_to_if(j, "blur_sigma_lo", a.blur_sigma_lo);
    get_to_if(j, "blur_sigma_hi", a.blur_sigma_hi);
    get_to_if(j, "p_lowres", a.p_lowres);
    get_to_if(j, "lowres_factor", a.lowres_factor);
    get_to_if(j, "target_count", a.target_count);
}

void load_llm(const nlohmann::json& j, LlmSettings& s) {
    get_to_if(j, "kind", s.kind);
    get_to_if(j, "mock_responses", s.mock_responses);
    get_to_if(j, "endpoint", s.endpoint);
    get_to_if(j, "path", s.path);
    get_to_if(j, "model", s.model);
    get_to_if(j, "api_key_env", s.api_key_env);
    get_to_if(j, "replay_file", s.replay_file);
    get_to_if(j, "budget", s.budget);
    get_to_if(j, "rate_per_sec", s.rate_per_sec);
    get_to_if(j, "burst", s.burst);
}

void load_adapter(const nlohmann::json& j, AdapterSettings& s) {
    get_to_if(j, "kind", s.kind);
    get_to_if(j, "endpoint", s.endpoint);
    get_to_if(j, "path", s.path);
    get_to_if(j, "api_key_env", s.api_key_env);
    get_to_if(j, "mock_mode", s.mock_mode);
    get_to_if(j, "retry_budget", s.retry_budget);
    get_to_if(j, "rate_per_sec", s.rate_per_sec);
}

} // namespace

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file: " + path.string());
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("config parse error in " + path.string() + ": " + e.what());
    }

    PipelineConfig cfg;
    if (j.contains("clean")) load_clean(j.at("clean"), cfg.clean);
    if (j.contains("augment")) load_augment(j.at("augment"), cfg.augment);
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        get_to_if(g, "cell_size", cfg.grid.cell_size);
        get_to_if(g, "columns", cfg.grid.columns);
        get_to_if(g, "label_height", cfg.grid.label_height);
    }
    if (j.contains("llm")) load_llm(j.at("llm"), cfg.llm);
    if (j.contains("generator")) load_adapter(j.at("generator"), cfg.generator);
    if (j.contains("expander")) load_adapter(j.at("expander"), cfg.expander);
    if (j.contains("detector")) load_adapter(j.at("detector"), cfg.detector);
    if (j.contains("leak")) get_to_if(j.at("leak"), "tau_leak", cfg.leak.tau_leak);
    if (j.contains("prompts")) {
        const auto& p = j.at("prompts");
        get_to_if(p, "bases", cfg.prompts.bases);
        get_to_if(p, "uniqueness_retries", cfg.prompts.uniqueness_retries);
        if (p.contains("attributes"))
            p.at("attributes").get_to(cfg.prompts.attributes);
    }
    if (j.contains("generate")) {
        const auto& g = j.at("generate");
        get_to_if(g, "expand_count", cfg.generate.expand_count);
        get_to_if(g, "gate_attempts", cfg.generate.gate_attempts);
        get_to_if(g, "embed_dim", cfg.generate.embed_dim);
    }
    return cfg;
}

} // namespace facepipe
