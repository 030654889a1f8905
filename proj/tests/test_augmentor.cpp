#include <doctest.h>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "facepipe/augmentor.hpp"
#include "facepipe/errors.hpp"
#include "facepipe/image.hpp"
#include "facepipe/json_io.hpp"
#include "facepipe/util.hpp"

using namespace facepipe;
namespace fs = std::filesystem;

namespace {

Image test_face(int w = 37, int h = 23) {
    Image img(h, w, CV_8UC3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img.at<cv::Vec3b>(y, x) =
                cv::Vec3b(std::uint8_t(x * 5), std::uint8_t(y * 9), std::uint8_t(x + y));
    return img;
}

AugStep only(AugKind kind, std::map<std::string, double> params = {}) {
    AugStep s;
    s.kind = kind;
    s.applied = true;
    s.params = std::move(params);
    return s;
}

AugmentRecipe recipe_of(std::vector<AugStep> steps) {
    AugmentRecipe r;
    r.source_index = 0;
    r.source_file = "000.png";
    r.output_file = "aug_0000.png";
    r.steps = std::move(steps);
    return r;
}

} // namespace

TEST_SUITE("augmentor") {

TEST_CASE("op order is fixed") {
    const auto& order = augmentation_order();
    const std::vector<AugKind> want = {
        AugKind::hflip,       AugKind::color_jitter, AugKind::grayscale,     AugKind::affine,
        AugKind::rotate,      AugKind::gaussian_blur, AugKind::low_resolution};
    CHECK(order == want);
    for (AugKind k : order) CHECK(aug_kind_from_string(to_string(k)) == k);
    CHECK_THROWS_AS(aug_kind_from_string("sepia"), ContractError);
}

TEST_CASE("sample_steps draws every op with parameters only when applied") {
    Rng rng(1);
    const AugmentConfig cfg;
    const auto steps = sample_steps(rng, cfg);
    REQUIRE(steps.size() == augmentation_order().size());
    for (std::size_t i = 0; i < steps.size(); ++i) {
        CHECK(steps[i].kind == augmentation_order()[i]);
        if (!steps[i].applied) CHECK(steps[i].params.empty());
    }

    Rng replay(1);
    const auto again = sample_steps(replay, cfg);
    for (std::size_t i = 0; i < steps.size(); ++i) {
        CHECK(steps[i].applied == again[i].applied);
        CHECK(steps[i].params == again[i].params);
    }
}

TEST_CASE("sampled parameters stay inside the configured ranges") {
    Rng rng(2);
    const AugmentConfig cfg;
    for (int round = 0; round < 500; ++round) {
        for (const AugStep& s : sample_steps(rng, cfg)) {
            if (!s.applied) continue;
            switch (s.kind) {
            case AugKind::color_jitter:
                CHECK(s.params.at("brightness") >= 0.8);
                CHECK(s.params.at("brightness") <= 1.2);
                CHECK(s.params.at("contrast") >= 0.8);
                CHECK(s.params.at("contrast") <= 1.2);
                CHECK(s.params.at("saturation") >= 0.8);
                CHECK(s.params.at("saturation") <= 1.2);
                CHECK(s.params.at("hue") >= -0.05);
                CHECK(s.params.at("hue") <= 0.05);
                break;
            case AugKind::affine:
                CHECK(std::abs(s.params.at("rotate_deg")) <= 10.0);
                CHECK(std::abs(s.params.at("translate_x")) <= 0.05);
                CHECK(std::abs(s.params.at("translate_y")) <= 0.05);
                CHECK(s.params.at("scale") >= 0.95);
                CHECK(s.params.at("scale") <= 1.05);
                CHECK(std::abs(s.params.at("shear_deg")) <= 5.0);
                break;
            case AugKind::rotate:
                CHECK(std::abs(s.params.at("angle_deg")) <= 5.0);
                break;
            case AugKind::gaussian_blur:
                CHECK(s.params.at("sigma") >= 0.1);
                CHECK(s.params.at("sigma") <= 2.0);
                CHECK(s.params.at("kernel") == 3.0);
                break;
            case AugKind::low_resolution:
                CHECK(s.params.at("factor") == 0.5);
                break;
            default:
                break;
            }
        }
    }
}

TEST_CASE("hflip applies with its configured probability") {
    Rng rng(3);
    const AugmentConfig cfg;
    int flips = 0, jitters = 0, grays = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const auto steps = sample_steps(rng, cfg);
        flips += steps[0].applied;
        jitters += steps[1].applied;
        grays += steps[2].applied;
    }
    CHECK(std::abs(flips / double(n) - 0.5) < 0.02);
    CHECK(std::abs(jitters / double(n) - 0.8) < 0.02);
    CHECK(std::abs(grays / double(n) - 0.2) < 0.02);
}

TEST_CASE("hflip mirrors pixels exactly") {
    const Image img = test_face(6, 3);
    const Image out = apply_recipe(img, recipe_of({only(AugKind::hflip)}));
    REQUIRE(out.cols == img.cols);
    REQUIRE(out.rows == img.rows);
    for (int y = 0; y < img.rows; ++y)
        for (int x = 0; x < img.cols; ++x)
            CHECK(out.at<cv::Vec3b>(y, x) == img.at<cv::Vec3b>(y, img.cols - 1 - x));
}

TEST_CASE("ops preserve the image geometry") {
    const Image img = test_face();
    const std::vector<AugmentRecipe> recipes = {
        recipe_of({only(AugKind::hflip)}),
        recipe_of({only(AugKind::color_jitter, {{"brightness", 1.1},
                                                {"contrast", 0.9},
                                                {"saturation", 1.2},
                                                {"hue", 0.03}})}),
        recipe_of({only(AugKind::grayscale)}),
        recipe_of({only(AugKind::affine, {{"rotate_deg", 7.0},
                                          {"translate_x", 0.04},
                                          {"translate_y", -0.02},
                                          {"scale", 1.03},
                                          {"shear_deg", 2.0}})}),
        recipe_of({only(AugKind::rotate, {{"angle_deg", -4.0}})}),
        recipe_of({only(AugKind::gaussian_blur, {{"sigma", 1.0}, {"kernel", 3.0}})}),
        recipe_of({only(AugKind::low_resolution, {{"factor", 0.5}})}),
    };
    for (const auto& r : recipes) {
        const Image out = apply_recipe(img, r);
        CHECK(out.cols == img.cols);
        CHECK(out.rows == img.rows);
        CHECK(out.type() == CV_8UC3);
    }
}

TEST_CASE("grayscale equalizes the channels; no-op recipes copy the input") {
    const Image img = test_face();
    const Image gray = apply_recipe(img, recipe_of({only(AugKind::grayscale)}));
    for (int y = 0; y < gray.rows; ++y)
        for (int x = 0; x < gray.cols; ++x) {
            const auto px = gray.at<cv::Vec3b>(y, x);
            CHECK(px[0] == px[1]);
            CHECK(px[1] == px[2]);
        }

    AugStep skipped;
    skipped.kind = AugKind::hflip;
    skipped.applied = false;
    const Image copy = apply_recipe(img, recipe_of({skipped}));
    CHECK(encode_png(copy) == encode_png(img));
}

TEST_CASE("recipes replay byte-identically through json") {
    Rng rng(4);
    const AugmentConfig cfg;
    const Image img = test_face();

    for (int round = 0; round < 25; ++round) {
        AugmentRecipe r = recipe_of(sample_steps(rng, cfg));
        const nlohmann::json j = recipe_to_json(r);
        const AugmentRecipe back = recipe_from_json(j);
        CHECK(dump_canonical(recipe_to_json(back)) == dump_canonical(j));

        const auto a = encode_png(apply_recipe(img, r));
        const auto b = encode_png(apply_recipe(img, back));
        CHECK(a == b);
    }
}

TEST_CASE("recipes missing a required parameter are rejected") {
    const Image img = test_face();
    CHECK_THROWS_AS(apply_recipe(img, recipe_of({only(AugKind::rotate)})), ContractError);
    CHECK_THROWS_AS(
        apply_recipe(img, recipe_of({only(AugKind::gaussian_blur, {{"sigma", 0.5},
                                                                   {"kernel", 4.0}})})),
        ContractError);
    CHECK_THROWS_AS(
        apply_recipe(img, recipe_of({only(AugKind::low_resolution, {{"factor", 0.0}})})),
        ContractError);
}

TEST_CASE("plan_replenishment rotates sources round-robin up to the target") {
    std::vector<std::string> kept;
    for (int i = 0; i < 30; ++i) kept.push_back(std::to_string(i) + ".png");

    AugmentConfig cfg; // target 50
    const auto plan = plan_replenishment(kept, cfg, 7, "000001");
    REQUIRE(plan.size() == 20);

    std::map<std::string, int> uses;
    for (std::size_t k = 0; k < plan.size(); ++k) {
        CHECK(plan[k].source_index == static_cast<int>(k % 30));
        CHECK(plan[k].source_file == kept[k % 30]);
        char name[16];
        std::snprintf(name, sizeof name, "aug_%04zu.png", k);
        CHECK(plan[k].output_file == name);
        uses[plan[k].source_file] += 1;
    }
    for (const auto& [file, n] : uses) CHECK(n == 1); // ceil/floor of 20/30

    const auto again = plan_replenishment(kept, cfg, 7, "000001");
    REQUIRE(again.size() == plan.size());
    for (std::size_t k = 0; k < plan.size(); ++k)
        CHECK(dump_canonical(recipe_to_json(again[k])) ==
              dump_canonical(recipe_to_json(plan[k])));

    const auto other = plan_replenishment(kept, cfg, 7, "000002");
    bool differs = false;
    for (std::size_t k = 0; k < plan.size(); ++k)
        if (dump_canonical(recipe_to_json(other[k])) != dump_canonical(recipe_to_json(plan[k])))
            differs = true;
    CHECK(differs); // identities draw independent streams

    CHECK(plan_replenishment(std::vector<std::string>(50, "x.png"), cfg, 7, "1").empty());
    CHECK_THROWS_AS(plan_replenishment({}, cfg, 7, "000001"), ContractError);
    CHECK_THROWS_AS(plan_replenishment(std::vector<std::string>(51, "x.png"), cfg, 7, "1"),
                    ContractError);
}

TEST_CASE("execute_plan writes files that reruns reproduce exactly") {
    const fs::path root = fs::temp_directory_path() / "facepipe_augment_exec";
    fs::remove_all(root);
    fs::create_directories(root / "000001");
    save_png(root / "000001" / "a.png", test_face(16, 16));
    save_png(root / "000001" / "b.png", test_face(12, 20));

    AugmentConfig cfg;
    cfg.target_count = 6;
    const auto plan = plan_replenishment({"a.png", "b.png"}, cfg, 11, "000001");
    REQUIRE(plan.size() == 4);

    CHECK(execute_plan(root, "000001", plan) == 4);
    std::map<std::string, std::vector<std::uint8_t>> bytes;
    for (const auto& r : plan) bytes[r.output_file] = read_file_bytes(root / "000001" / r.output_file);

    CHECK(execute_plan(root, "000001", plan) == 4); // idempotent rerun
    for (const auto& [file, data] : bytes)
        CHECK(read_file_bytes(root / "000001" / file) == data);

    AugmentRecipe missing = plan[0];
    missing.source_file = "zz.png";
    CHECK_THROWS_AS(execute_plan(root, "000001", {missing}), IoError);
    fs::remove_all(root);
}

} // TEST_SUITE
