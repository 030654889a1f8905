#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "facepipe/cluster.hpp"
#include "facepipe/curriculum.hpp"
#include "facepipe/errors.hpp"
#include "facepipe/rng.hpp"
#include "facepipe/synthcorpus.hpp"

#include "support/reference_impls.hpp"

using namespace facepipe;

namespace {

std::vector<IdentityRecord> pool_of(std::size_t n) {
    std::vector<IdentityRecord> pool(n);
    for (std::size_t i = 0; i < n; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "%06zu", 900000 + i);
        pool[i].identity_id = id;
    }
    return pool;
}

ScoredIdentity scored(const std::string& id, double difficulty, std::size_t paths = 50) {
    ScoredIdentity s;
    s.identity_id = id;
    s.difficulty = difficulty;
    for (std::size_t k = 0; k < paths; ++k)
        s.image_paths.push_back(id + "/" + std::to_string(k) + ".png");
    return s;
}

} // namespace

TEST_SUITE("curriculum") {

TEST_CASE("select_replacements pairs each discarded id with a distinct pool index") {
    const std::vector<std::string> discarded = {"000003", "000007", "000001"};
    const auto pool = pool_of(6);

    Rng rng(5);
    const auto picks = select_replacements(discarded, pool, rng);
    REQUIRE(picks.size() == 3);
    std::set<std::size_t> used;
    for (std::size_t i = 0; i < picks.size(); ++i) {
        CHECK(picks[i].first == discarded[i]); // order of discarded ids preserved
        CHECK(picks[i].second < pool.size());
        used.insert(picks[i].second);
    }
    CHECK(used.size() == 3); // without replacement

    Rng again(5);
    CHECK(select_replacements(discarded, pool, again) == picks);

    Rng empty_rng(5);
    CHECK(select_replacements({}, pool, empty_rng).empty());

    Rng short_rng(5);
    CHECK_THROWS_AS(select_replacements({"a", "b", "c"}, pool_of(2), short_rng), ContractError);
}

TEST_CASE("replacement sampling is uniform over the pool") {
    const std::vector<std::string> discarded = {"000000"};
    const auto pool = pool_of(5);
    std::map<std::size_t, int> counts;
    for (std::uint64_t seed = 0; seed < 2000; ++seed) {
        Rng rng(seed);
        counts[select_replacements(discarded, pool, rng)[0].second] += 1;
    }
    REQUIRE(counts.size() == 5);
    for (const auto& [index, n] : counts)
        CHECK(std::abs(n - 400) < 60); // ~3.3 sigma for Binomial(2000, 0.2)
}

TEST_CASE("replenish_multiplicities splits the shortfall round-robin") {
    CHECK(replenish_multiplicities(3, 50) == std::vector<std::size_t>{17, 17, 16});
    CHECK(replenish_multiplicities(50, 50) == std::vector<std::size_t>(50, 1));
    CHECK(replenish_multiplicities(1, 50) == std::vector<std::size_t>{50});

    const auto thirty = replenish_multiplicities(30, 50);
    CHECK(std::count(thirty.begin(), thirty.end(), 2) == 20);
    CHECK(std::count(thirty.begin(), thirty.end(), 1) == 10);

    for (std::size_t m = 1; m <= 50; ++m) {
        const auto mult = replenish_multiplicities(m, 50);
        CHECK(std::accumulate(mult.begin(), mult.end(), std::size_t{0}) == 50);
        const auto [lo, hi] = std::minmax_element(mult.begin(), mult.end());
        CHECK(*hi - *lo <= 1); // as even as possible
    }

    CHECK_THROWS_AS(replenish_multiplicities(0, 50), ContractError);
    CHECK_THROWS_AS(replenish_multiplicities(51, 50), ContractError);
}

TEST_CASE("score_difficulty equals dispersion of the physically expanded matrix") {
    Rng rng(31);
    EmbeddingMatrix matrix(8);
    for (int i = 0; i < 5; ++i) matrix.add_row(random_unit(rng, 8));

    const std::vector<std::size_t> rows = {0, 2, 3};
    const std::vector<std::size_t> mult = {3, 1, 2};

    EmbeddingMatrix expanded(8);
    std::vector<std::size_t> flat;
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t k = 0; k < mult[i]; ++k) {
            expanded.add_row(matrix.row(rows[i]));
            flat.push_back(flat.size());
        }

    const double score = score_difficulty(matrix, rows, mult);
    CHECK(score == dispersion(expanded, flat)); // bit-exact by summation order
    CHECK(score > 0.0);

    CHECK_THROWS_AS(score_difficulty(matrix, rows, {1, 2}), ContractError);
    CHECK_THROWS_AS(score_difficulty(matrix, rows, {1, 0, 1}), ContractError);
}

TEST_CASE("tighter groups score easier than looser ones") {
    Rng rng(32);
    const auto center = random_unit(rng, 64);
    EmbeddingMatrix matrix(64);
    for (int i = 0; i < 10; ++i) matrix.add_row(rotate_from(center, 0.03, rng));
    for (int i = 0; i < 10; ++i) matrix.add_row(rotate_from(center, 0.30, rng));

    std::vector<std::size_t> tight, loose;
    for (std::size_t i = 0; i < 10; ++i) {
        tight.push_back(i);
        loose.push_back(10 + i);
    }
    const std::vector<std::size_t> ones(10, 1);
    CHECK(score_difficulty(matrix, tight, ones) < score_difficulty(matrix, loose, ones));
}

TEST_CASE("build_manifest orders tiers and difficulties") {
    const std::vector<ScoredIdentity> synthetic = {scored("900001", 0.4), scored("900000", 0.1)};
    const std::vector<ScoredIdentity> cleaned = {scored("000002", 0.3), scored("000001", 0.05),
                                                 scored("000003", 0.05)};

    const DatasetManifest manifest = build_manifest(synthetic, cleaned, 50);
    REQUIRE(manifest.entries.size() == 5);
    CHECK(manifest.entries[0].identity_id == "900000");
    CHECK(manifest.entries[1].identity_id == "900001");
    CHECK(manifest.entries[0].tier == Tier::synthetic);
    CHECK(manifest.entries[1].tier == Tier::synthetic);
    CHECK(manifest.entries[2].identity_id == "000001"); // 0.05 tie broken by id
    CHECK(manifest.entries[3].identity_id == "000003");
    CHECK(manifest.entries[4].identity_id == "000002");
    for (std::size_t i = 2; i < 5; ++i) CHECK(manifest.entries[i].tier == Tier::cleaned);
    CHECK(validate_manifest(manifest, 50).empty());

    SUBCASE("either tier may be empty") {
        CHECK(build_manifest({}, cleaned, 50).entries.size() == 3);
        CHECK(build_manifest(synthetic, {}, 50).entries.size() == 2);
        CHECK(build_manifest({}, {}, 50).entries.empty());
    }
    SUBCASE("an entry with the wrong image count is rejected") {
        CHECK_THROWS_AS(build_manifest({scored("900000", 0.1, 49)}, {}, 50), ContractError);
    }
    SUBCASE("duplicate ids across tiers are rejected") {
        CHECK_THROWS_AS(build_manifest({scored("000002", 0.1)}, cleaned, 50), ContractError);
    }
    SUBCASE("difficulty must be finite and nonnegative") {
        CHECK_THROWS_AS(build_manifest({scored("900000", -0.5)}, {}, 50), ContractError);
    }
    SUBCASE("custom group size is honored") {
        const auto m = build_manifest({scored("900000", 0.1, 10)}, {}, 10);
        CHECK(m.entries.size() == 1);
    }
}

} // TEST_SUITE
