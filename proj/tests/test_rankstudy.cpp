#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "caplab/json_io.hpp"
#include "caplab/rankstudy.hpp"
#include "helpers.hpp"

using namespace caplab;
using namespace caplab::testing;

namespace {

RankingFile two_images() {
    RankingFile file;
    file.images.push_back({"img0", {"a", "b", "c", "d"}});
    file.images.push_back({"img1", {"d", "c", "b", "a"}});
    return file;
}

}  // namespace

TEST_CASE("ranking files round-trip and canonicalize integer ids") {
    TempDir dir;
    const RankingFile original = two_images();
    const std::string path = dir.file("ranks.jsonl");
    write_text(path, serialize_rankings(original));

    const RankingFile loaded = read_rankings(path);
    REQUIRE(loaded.images.size() == 2);
    CHECK(loaded.images[0].image_id == "img0");
    CHECK(loaded.images[0].order == std::vector<std::string>{"a", "b", "c", "d"});
    CHECK(serialize_rankings(loaded) == serialize_rankings(original));

    write_text(path, "{\"image_id\": \"x\", \"order\": [2, 1, 3]}\n");
    const RankingFile ints = read_rankings(path);
    CHECK(ints.images[0].order == std::vector<std::string>{"2", "1", "3"});
}

TEST_CASE("ranking reader rejects malformed files") {
    TempDir dir;
    const std::string path = dir.file("ranks.jsonl");

    write_text(path, "{\"image_id\": \"x\"}\n");
    CHECK_THROWS_AS(read_rankings(path), DataError);

    write_text(path, "{\"order\": [\"a\"]}\n");
    CHECK_THROWS_AS(read_rankings(path), DataError);

    write_text(path, "{\"image_id\": \"x\", \"order\": [1.5]}\n");
    CHECK_THROWS_AS(read_rankings(path), DataError);

    const std::string dup = "{\"image_id\": \"x\", \"order\": [\"a\", \"b\"]}\n";
    write_text(path, dup + dup);
    try {
        read_rankings(path);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("duplicate image") != std::string::npos);
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }

    CHECK_THROWS_AS(read_rankings(dir.file("missing.jsonl")), DataError);
}

TEST_CASE("a ranking file correlates perfectly with itself") {
    const RankingFile file = two_images();
    const CorrelationReport report = correlate_rankings(file, file);
    REQUIRE(report.rows.size() == 2);
    for (const auto& row : report.rows) {
        CHECK(row.tau == 1.0);
        CHECK(row.rho == 1.0);
    }
    CHECK(report.mean_tau == 1.0);
    CHECK(report.mean_rho == 1.0);
}

TEST_CASE("reversed orders correlate at minus one") {
    const RankingFile a = two_images();
    RankingFile b = a;
    for (auto& image : b.images) std::reverse(image.order.begin(), image.order.end());
    const CorrelationReport report = correlate_rankings(a, b);
    CHECK(report.mean_tau == -1.0);
    CHECK(report.mean_rho == -1.0);
}

TEST_CASE("correlate_rankings names coverage defects") {
    const RankingFile a = two_images();

    RankingFile missing = a;
    missing.images.pop_back();
    CHECK_THROWS_AS(correlate_rankings(a, missing), DataError);

    RankingFile renamed = a;
    renamed.images[1].image_id = "img9";
    try {
        correlate_rankings(a, renamed);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("img") != std::string::npos);
    }

    RankingFile short_list = a;
    short_list.images[0].order = {"a"};
    CHECK_THROWS_AS(correlate_rankings(short_list, short_list), DataError);

    RankingFile duplicated = a;
    duplicated.images[0].order = {"a", "a", "b", "c"};
    CHECK_THROWS_AS(correlate_rankings(duplicated, a), DataError);

    RankingFile other_candidates = a;
    other_candidates.images[0].order = {"a", "b", "c", "z"};
    CHECK_THROWS_AS(correlate_rankings(a, other_candidates), DataError);

    CHECK_THROWS_AS(correlate_rankings(RankingFile{}, RankingFile{}), DataError);
}

TEST_CASE("rank study config validation") {
    CHECK_NOTHROW(validate(RankStudyConfig{}));
    RankStudyConfig bad;
    bad.images = 0;
    CHECK_THROWS_AS(validate(bad), ValidationError);
    bad = RankStudyConfig{};
    bad.captions_per_image = 1;
    CHECK_THROWS_AS(validate(bad), ValidationError);
    bad = RankStudyConfig{};
    bad.noise = 1.5;
    CHECK_THROWS_AS(validate(bad), ValidationError);
}

TEST_CASE("noise-free study recovers the planted order exactly") {
    RankStudyConfig config;
    config.images = 40;
    config.noise = 0.0;
    config.seed = 3;
    const RankStudyReport report = planted_quality_study(config);
    CHECK(report.noisy_images == 0);
    REQUIRE(report.correlation.rows.size() == 40);
    for (const auto& row : report.correlation.rows) {
        CHECK(row.tau == 1.0);
        CHECK(row.rho == 1.0);
    }
    CHECK(report.correlation.mean_tau == 1.0);
    CHECK(report.correlation.mean_rho == 1.0);
    CHECK(report.correlation.rows[0].image_id == "img0000");
}

TEST_CASE("full label noise costs one adjacent swap per image") {
    RankStudyConfig config;
    config.images = 25;
    config.noise = 1.0;
    config.seed = 4;
    const RankStudyReport report = planted_quality_study(config);
    CHECK(report.noisy_images == 25);
    for (const auto& row : report.correlation.rows) {
        // One adjacent transposition in a ranking of five: tau 0.8, rho 0.9.
        CHECK(row.tau == 0.8);
        CHECK(row.rho == 0.9);
    }
    CHECK(std::abs(report.correlation.mean_tau - 0.8) < 1e-12);
    CHECK(std::abs(report.correlation.mean_rho - 0.9) < 1e-12);
}

TEST_CASE("study reports are deterministic and scale past five tiers") {
    RankStudyConfig config;
    config.images = 10;
    config.noise = 0.3;
    config.seed = 5;
    config.captions_per_image = 8;
    const RankStudyReport a = planted_quality_study(config);
    const RankStudyReport b = planted_quality_study(config);
    CHECK(nlohmann::json(a) == nlohmann::json(b));
    CHECK(a.correlation.rows.size() == 10);
    CHECK(a.config.captions_per_image == 8);
    CHECK(a.correlation.mean_tau > 0.5);
}
