#include "facepipe/augmentor.hpp"

#include <cmath>
#include <cstdio>

#include <opencv2/imgproc.hpp>

#include "facepipe/errors.hpp"
#include "facepipe/util.hpp"

namespace facepipe {

namespace {

double param(const AugStep& step, const char* name) {
    auto it = step.params.find(name);
    if (it == step.params.end())
        throw ContractError(std::string("recipe step ") + to_string(step.kind) +
                            " missing parameter '" + name + "'");
    return it->second;
}

Image apply_hflip(const Image& src) {
    Image dst;
    cv::flip(src, dst, 1);
    return dst;
}

Image apply_color_jitter(const Image& src, const AugStep& step) {
    const double brightness = param(step, "brightness");
    const double contrast = param(step, "contrast");
    const double saturation = param(step, "saturation");
    const double hue = param(step, "hue");

    cv::Mat f;
    src.convertTo(f, CV_32FC3);
    f *= brightness;

    // Contrast pivots on the mean gray level, saturation on the per-pixel
    // gray image.
    cv::Mat gray;
    cv::cvtColor(f, gray, cv::COLOR_BGR2GRAY);
    const double mean_gray = cv::mean(gray)[0];
    f = f * contrast + cv::Scalar::all(mean_gray * (1.0 - contrast));

    cv::Mat gray3;
    cv::cvtColor(gray, gray3, cv::COLOR_GRAY2BGR);
    f = f * saturation + gray3 * (1.0 - saturation);

    Image u8;
    f.convertTo(u8, CV_8UC3); // saturating cast clamps to [0, 255]

    if (hue != 0.0) {
        cv::Mat hsv;
        cv::cvtColor(u8, hsv, cv::COLOR_BGR2HSV); // H in [0, 180)
        const int shift = static_cast<int>(std::lround(hue * 180.0));
        for (int y = 0; y < hsv.rows; ++y) {
            auto* row = hsv.ptr<cv::Vec3b>(y);
            for (int x = 0; x < hsv.cols; ++x)
                row[x][0] = static_cast<uchar>(((row[x][0] + shift) % 180 + 180) % 180);
        }
        cv::cvtColor(hsv, u8, cv::COLOR_HSV2BGR);
    }
    return u8;
}

Image apply_grayscale(const Image& src) {
    Image gray, out;
    cv::cvtColor(src, gray, cv::COLOR_BGR2GRAY);
    cv::cvtColor(gray, out, cv::COLOR_GRAY2BGR);
    return out;
}

// rotation * shear * scale about the image center, plus fractional
// translation.
Image apply_affine(const Image& src, const AugStep& step) {
    const double theta = param(step, "rotate_deg") * CV_PI / 180.0;
    const double tx = param(step, "translate_x") * src.cols;
    const double ty = param(step, "translate_y") * src.rows;
    const double scale = param(step, "scale");
    const double shear = std::tan(param(step, "shear_deg") * CV_PI / 180.0);

    const double c = std::cos(theta), s = std::sin(theta);
    // R * Sh * S
    const double m00 = scale * c, m01 = scale * (c * shear - s);
    const double m10 = scale * s, m11 = scale * (s * shear + c);
    const double cx = src.cols * 0.5, cy = src.rows * 0.5;

    cv::Mat M(2, 3, CV_64F);
    M.at<double>(0, 0) = m00;
    M.at<double>(0, 1) = m01;
    M.at<double>(0, 2) = cx - m00 * cx - m01 * cy + tx;
    M.at<double>(1, 0) = m10;
    M.at<double>(1, 1) = m11;
    M.at<double>(1, 2) = cy - m10 * cx - m11 * cy + ty;

    Image dst;
    cv::warpAffine(src, dst, M, src.size(), cv::INTER_LINEAR, cv::BORDER_CONSTANT,
                   cv::Scalar(0, 0, 0));
    return dst;
}

Image apply_rotate(const Image& src, const AugStep& step) {
    AugStep eq;
    eq.kind = AugKind::affine;
    eq.params = {{"rotate_deg", param(step, "angle_deg")},
                 {"translate_x", 0.0},
                 {"translate_y", 0.0},
                 {"scale", 1.0},
                 {"shear_deg", 0.0}};
    return apply_affine(src, eq);
}

Image apply_blur(const Image& src, const AugStep& step) {
    const int k = static_cast<int>(param(step, "kernel"));
    if (k < 1 || k % 2 == 0) throw ContractError("gaussian_blur kernel must be odd and >= 1");
    Image dst;
    cv::GaussianBlur(src, dst, cv::Size(k, k), param(step, "sigma"), param(step, "sigma"));
    return dst;
}

Image apply_lowres(const Image& src, const AugStep& step) {
    const double factor = param(step, "factor");
    if (factor <= 0.0 || factor > 1.0)
        throw ContractError("low_resolution factor must be in (0, 1]");
    const int w = std::max(1, static_cast<int>(std::lround(src.cols * factor)));
    const int h = std::max(1, static_cast<int>(std::lround(src.rows * factor)));
    Image small, dst;
    cv::resize(src, small, cv::Size(w, h), 0, 0, cv::INTER_LINEAR);
    cv::resize(small, dst, src.size(), 0, 0, cv::INTER_LINEAR);
    return dst;
}

} // namespace

const std::vector<AugKind>& augmentation_order() {
    static const std::vector<AugKind> order{
        AugKind::hflip,      AugKind::color_jitter,  AugKind::grayscale, AugKind::affine,
        AugKind::rotate,     AugKind::gaussian_blur, AugKind::low_resolution,
    };
    return order;
}

std::string to_string(AugKind k) {
    switch (k) {
    case AugKind::hflip: return "hflip";
    case AugKind::color_jitter: return "color_jitter";
    case AugKind::grayscale: return "grayscale";
    case AugKind::affine: return "affine";
    case AugKind::rotate: return "rotate";
    case AugKind::gaussian_blur: return "gaussian_blur";
    case AugKind::low_resolution: return "low_resolution";
    }
    return "hflip";
}

AugKind aug_kind_from_string(const std::string& s) {
    for (AugKind k : augmentation_order())
        if (to_string(k) == s) return k;
    throw ContractError("unknown augmentation op: " + s);
}

nlohmann::json recipe_to_json(const AugmentRecipe& r) {
    nlohmann::json steps = nlohmann::json::array();
    for (const AugStep& s : r.steps) {
        nlohmann::json js{{"op", to_string(s.kind)}, {"applied", s.applied}};
        js["params"] = s.params;
        steps.push_back(std::move(js));
    }
    return nlohmann::json{{"source_index", r.source_index},
                          {"source", r.source_file},
                          {"output", r.output_file},
                          {"steps", steps}};
}

AugmentRecipe recipe_from_json(const nlohmann::json& j) {
    AugmentRecipe r;
    r.source_index = j.at("source_index").get<int>();
    r.source_file = j.at("source").get<std::string>();
    r.output_file = j.at("output").get<std::string>();
    for (const nlohmann::json& js : j.at("steps")) {
        AugStep s;
        s.kind = aug_kind_from_string(js.at("op").get<std::string>());
        s.applied = js.at("applied").get<bool>();
        s.params = js.at("params").get<std::map<std::string, double>>();
        r.steps.push_back(std::move(s));
    }
    return r;
}

std::vector<AugStep> sample_steps(Rng& rng, const AugmentConfig& cfg) {
    std::vector<AugStep> steps;
    for (AugKind kind : augmentation_order()) {
        AugStep step;
        step.kind = kind;
        switch (kind) {
        case AugKind::hflip:
            step.applied = rng.bernoulli(cfg.p_hflip);
            break;
        case AugKind::color_jitter:
            step.applied = rng.bernoulli(cfg.p_jitter);
            if (step.applied) {
                step.params["brightness"] =
                    rng.uniform(cfg.jitter_brightness_lo, cfg.jitter_brightness_hi);
                step.params["contrast"] =
                    rng.uniform(cfg.jitter_contrast_lo, cfg.jitter_contrast_hi);
                step.params["saturation"] =
                    rng.uniform(cfg.jitter_saturation_lo, cfg.jitter_saturation_hi);
                step.params["hue"] = rng.uniform(cfg.jitter_hue_lo, cfg.jitter_hue_hi);
            }
            break;
        case AugKind::grayscale:
            step.applied = rng.bernoulli(cfg.p_gray);
            break;
        case AugKind::affine:
            step.applied = rng.bernoulli(cfg.p_affine);
            if (step.applied) {
                step.params["rotate_deg"] =
                    rng.uniform(-cfg.affine_max_rot_deg, cfg.affine_max_rot_deg);
                step.params["translate_x"] =
                    rng.uniform(-cfg.affine_max_translate, cfg.affine_max_translate);
                step.params["translate_y"] =
                    rng.uniform(-cfg.affine_max_translate, cfg.affine_max_translate);
                step.params["scale"] = rng.uniform(cfg.affine_scale_lo, cfg.affine_scale_hi);
                step.params["shear_deg"] =
                    rng.uniform(-cfg.affine_max_shear_deg, cfg.affine_max_shear_deg);
            }
            break;
        case AugKind::rotate:
            step.applied = rng.bernoulli(cfg.p_rot);
            if (step.applied)
                step.params["angle_deg"] = rng.uniform(-cfg.rot_max_deg, cfg.rot_max_deg);
            break;
        case AugKind::gaussian_blur:
            step.applied = rng.bernoulli(cfg.p_blur);
            if (step.applied) {
                step.params["sigma"] = rng.uniform(cfg.blur_sigma_lo, cfg.blur_sigma_hi);
                step.params["kernel"] = cfg.blur_kernel;
            }
            break;
        case AugKind::low_resolution:
            step.applied = rng.bernoulli(cfg.p_lowres);
            if (step.applied) step.params["factor"] = cfg.lowres_factor;
            break;
        }
        steps.push_back(std::move(step));
    }
    return steps;
}

Image apply_recipe(const Image& input, const AugmentRecipe& recipe) {
    if (input.empty()) throw ContractError("apply_recipe: empty input image");
    Image img = input;
    for (const AugStep& step : recipe.steps) {
        if (!step.applied) continue;
        switch (step.kind) {
        case AugKind::hflip: img = apply_hflip(img); break;
        case AugKind::color_jitter: img = apply_color_jitter(img, step); break;
        case AugKind::grayscale: img = apply_grayscale(img); break;
        case AugKind::affine: img = apply_affine(img, step); break;
        case AugKind::rotate: img = apply_rotate(img, step); break;
        case AugKind::gaussian_blur: img = apply_blur(img, step); break;
        case AugKind::low_resolution: img = apply_lowres(img, step); break;
        }
    }
    return img;
}

std::vector<AugmentRecipe> plan_replenishment(const std::vector<std::string>& kept_files,
                                              const AugmentConfig& cfg, std::uint64_t seed,
                                              const std::string& identity_id) {
    if (kept_files.empty())
        throw ContractError("plan_replenishment: identity " + identity_id + " has no kept images");
    if (kept_files.size() > static_cast<std::size_t>(cfg.target_count))
        throw ContractError("plan_replenishment: identity " + identity_id + " already has " +
                            std::to_string(kept_files.size()) + " images (target " +
                            std::to_string(cfg.target_count) + ")");

    const std::size_t need = static_cast<std::size_t>(cfg.target_count) - kept_files.size();
    Rng rng(derive_seed(seed, identity_id));
    std::vector<AugmentRecipe> plan;
    plan.reserve(need);
    for (std::size_t k = 0; k < need; ++k) {
        AugmentRecipe recipe;
        recipe.source_index = static_cast<int>(k % kept_files.size());
        recipe.source_file = kept_files[static_cast<std::size_t>(recipe.source_index)];
        char name[32];
        std::snprintf(name, sizeof name, "aug_%04zu.png", k);
        recipe.output_file = name;
        recipe.steps = sample_steps(rng, cfg);
        plan.push_back(std::move(recipe));
    }
    return plan;
}

std::size_t execute_plan(const std::filesystem::path& root, const std::string& identity_id,
                         const std::vector<AugmentRecipe>& recipes) {
    const std::filesystem::path dir = root / identity_id;
    std::map<std::string, Image> sources;
    for (const AugmentRecipe& recipe : recipes) {
        auto it = sources.find(recipe.source_file);
        if (it == sources.end())
            it = sources.emplace(recipe.source_file, load_image(dir / recipe.source_file)).first;
        save_png(dir / recipe.output_file, apply_recipe(it->second, recipe));
    }
    return recipes.size();
}

} // namespace facepipe
