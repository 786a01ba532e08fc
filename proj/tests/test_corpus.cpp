#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "caplab/common.hpp"
#include "caplab/corpus.hpp"
#include "caplab/rng.hpp"
#include "helpers.hpp"

using namespace caplab;
using namespace caplab::testing;

namespace {

CorpusConfig small_config() {
    CorpusConfig config;
    config.n_samples = 60;
    config.seed = 11;
    return config;
}

// Single-token names let membership checks read straight off the phrase.
int only_token(const Phrase& phrase) {
    const auto& tokens = std::get<TokenSeq>(phrase);
    REQUIRE(tokens.size() == 1);
    return tokens[0];
}

bool gt_contains(const Sample& sample, int token) {
    return std::find(sample.ground_truth.begin(), sample.ground_truth.end(), token) !=
           sample.ground_truth.end();
}

}  // namespace

TEST_CASE("fnv1a64 matches published reference vectors") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("hello") == 0xa430d84680aabd0bULL);
}

TEST_CASE("hex64 zero-pads to 16 lowercase digits") {
    CHECK(hex64(0) == "0000000000000000");
    CHECK(hex64(0xdeadbeefULL) == "00000000deadbeef");
    CHECK(hex64(~0ULL) == "ffffffffffffffff");
}

TEST_CASE("splitmix64 matches the reference sequence") {
    CHECK(splitmix64(0) == 0xe220a8397b1dcdafULL);
    Rng rng(0);
    CHECK(rng.next_u64() == 0xe220a8397b1dcdafULL);
    CHECK(rng.next_u64() == 0x6e789e6aa1b965f4ULL);
    CHECK(rng.next_u64() == 0x06c45d188009454fULL);
}

TEST_CASE("rng streams are pure functions of the seed") {
    Rng a(42), b(42), c(43);
    bool all_equal = true;
    bool any_differ = false;
    for (int i = 0; i < 64; ++i) {
        const auto va = a.next_u64();
        all_equal = all_equal && va == b.next_u64();
        any_differ = any_differ || va != c.next_u64();
    }
    CHECK(all_equal);
    CHECK(any_differ);
}

TEST_CASE("uniform01 stays in [0, 1) with a sane mean") {
    Rng rng(1);
    double sum = 0.0;
    bool in_range = true;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform01();
        in_range = in_range && u >= 0.0 && u < 1.0;
        sum += u;
    }
    CHECK(in_range);
    CHECK(std::abs(sum / n - 0.5) < 0.02);
}

TEST_CASE("uniform_int respects inclusive bounds and hits every value") {
    Rng rng(2);
    std::set<int> seen;
    bool in_range = true;
    for (int i = 0; i < 5000; ++i) {
        const int v = rng.uniform_int(3, 7);
        in_range = in_range && v >= 3 && v <= 7;
        seen.insert(v);
    }
    CHECK(in_range);
    CHECK(seen.size() == 5);
    CHECK(rng.uniform_int(5, 5) == 5);
}

TEST_CASE("normal draws have roughly standard moments") {
    Rng rng(3);
    const int n = 20000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sumsq += x * x;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(std::abs(mean) < 0.05);
    CHECK(var > 0.9);
    CHECK(var < 1.1);
}

TEST_CASE("corpus config validation names the offending field") {
    CHECK_NOTHROW(validate(CorpusConfig{}));

    CorpusConfig bad = small_config();
    bad.hard_fraction = 1.5;
    CHECK_THROWS_WITH_AS(validate(bad), "hard_fraction must lie in [0, 1]", ValidationError);

    bad = small_config();
    bad.toys_per_sample_min = 5;
    bad.toys_per_sample_max = 4;
    CHECK_THROWS_AS(validate(bad), ValidationError);

    bad = small_config();
    bad.caption_length = 3;
    CHECK_THROWS_AS(validate(bad), ValidationError);

    bad = small_config();
    bad.n_toys = 40;  // needs 3 + 120 tokens, vocab has 96
    try {
        validate(bad);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        const std::string what = e.what();
        CHECK(what.find("vocab_size 96") != std::string::npos);
        CHECK(what.find("123") != std::string::npos);
    }
}

TEST_CASE("hard fraction produces an exact hard-sample count") {
    CorpusConfig config;
    config.n_samples = 100;
    config.hard_fraction = 0.2;
    config.seed = 7;
    const Dataset dataset = generate_corpus(config);
    const auto hard = std::count_if(dataset.samples.begin(), dataset.samples.end(),
                                    [](const Sample& s) { return s.hardness == Hardness::Hard; });
    CHECK(hard == 20);
    CHECK(dataset.samples.size() == 100);
}

TEST_CASE("generation is byte-deterministic in the config") {
    CorpusConfig config = small_config();
    config.hard_fraction = 0.25;
    const Dataset a = generate_corpus(config);
    const Dataset b = generate_corpus(config);
    CHECK(serialize_dataset(a) == serialize_dataset(b));
    CHECK(corpus_hash(a) == corpus_hash(b));

    config.seed = 12;
    CHECK(corpus_hash(generate_corpus(config)) != corpus_hash(a));
}

TEST_CASE("generated samples satisfy every structural invariant") {
    CorpusConfig config = small_config();
    config.hard_fraction = 0.3;
    const Dataset dataset = generate_corpus(config);
    const int max_fg = std::max(1, (config.caption_length - 1) / 3);

    std::set<std::string> ids;
    for (const auto& sample : dataset.samples) {
        CHECK_NOTHROW(validate_sample(sample, dataset.header));
        CHECK(ids.insert(sample.sample_id).second);
        const int n_toys = static_cast<int>(sample.toys.size());
        CHECK(n_toys >= config.toys_per_sample_min);
        CHECK(n_toys <= config.toys_per_sample_max);
        const auto fg = std::count_if(sample.toys.begin(), sample.toys.end(), [](const auto& t) {
            return t.role == ToyRole::Foreground;
        });
        CHECK(fg >= 1);
        CHECK(fg <= max_fg);
        CHECK(sample.ground_truth.size() == static_cast<std::size_t>(config.caption_length));
        CHECK(sample.ground_truth.back() == kEosToken);
        CHECK(sample.features.size() == static_cast<std::size_t>(config.feature_dim));
    }
}

TEST_CASE("foreground toys are mentioned at all three levels in their own caption") {
    CorpusConfig config = small_config();
    config.hard_fraction = 0.0;
    const Dataset dataset = generate_corpus(config);
    for (const auto& sample : dataset.samples) {
        for (const auto& toy : sample.toys) {
            if (toy.role == ToyRole::Foreground) {
                for (PrecisionLevel level : kAllLevels) {
                    CHECK(gt_contains(sample, only_token(toy.names_at(level)[0])));
                }
            } else {
                // Backgrounds are at most mentioned coarsely.
                CHECK_FALSE(gt_contains(sample, only_token(toy.names_at(PrecisionLevel::Medium)[0])));
                CHECK_FALSE(gt_contains(sample, only_token(toy.names_at(PrecisionLevel::High)[0])));
            }
        }
    }
}

TEST_CASE("background mention rate zero leaves captions free of background names") {
    CorpusConfig config = small_config();
    config.background_mention_rate = 0.0;
    const Dataset dataset = generate_corpus(config);
    bool any_bg_mention = false;
    for (const auto& sample : dataset.samples) {
        for (const auto& toy : sample.toys) {
            if (toy.role != ToyRole::Background) continue;
            any_bg_mention =
                any_bg_mention || gt_contains(sample, only_token(toy.names_at(PrecisionLevel::Low)[0]));
        }
    }
    CHECK_FALSE(any_bg_mention);
}

TEST_CASE("hard samples draw from a toy pool easy samples never touch") {
    CorpusConfig config;
    config.n_samples = 200;
    config.hard_fraction = 0.3;
    config.seed = 5;
    const Dataset dataset = generate_corpus(config);

    std::set<int> easy_tokens;
    for (const auto& sample : dataset.samples) {
        if (sample.hardness != Hardness::Easy) continue;
        easy_tokens.insert(sample.ground_truth.begin(), sample.ground_truth.end());
        for (const auto& toy : sample.toys) {
            for (PrecisionLevel level : kAllLevels) {
                for (const auto& name : toy.names_at(level)) easy_tokens.insert(only_token(name));
            }
        }
    }

    bool saw_hard = false;
    bool disjoint = true;
    for (const auto& sample : dataset.samples) {
        if (sample.hardness != Hardness::Hard) continue;
        saw_hard = true;
        for (const auto& toy : sample.toys) {
            for (PrecisionLevel level : kAllLevels) {
                for (const auto& name : toy.names_at(level)) {
                    disjoint = disjoint && easy_tokens.count(only_token(name)) == 0;
                }
            }
        }
    }
    CHECK(saw_hard);
    CHECK(disjoint);
}

TEST_CASE("dataset files round-trip exactly, provenance config included") {
    TempDir dir;
    CorpusConfig config = small_config();
    config.hard_fraction = 0.2;
    const Dataset dataset = generate_corpus(config);
    const std::string path = dir.file("corpus.jsonl");
    write_dataset(dataset, path);

    const Dataset loaded = read_dataset(path);
    CHECK(loaded == dataset);
    REQUIRE(loaded.header.config.has_value());
    CHECK(*loaded.header.config == config);
    CHECK(corpus_hash(loaded) == corpus_hash(dataset));
}

TEST_CASE("reader reports malformed records with their line number") {
    TempDir dir;
    const Dataset dataset = generate_corpus(small_config());
    std::string body = serialize_dataset(dataset);
    const auto pos = body.find("\"foreground\"");
    REQUIRE(pos != std::string::npos);
    body.replace(pos, 12, "\"middleground\"");
    const std::string path = dir.file("tampered.jsonl");
    write_text(path, body);

    try {
        read_dataset(path);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string what = e.what();
        CHECK(what.find("line 2") != std::string::npos);
        CHECK(what.find("middleground") != std::string::npos);
    }
}

TEST_CASE("reader rejects invalid JSON and missing files") {
    TempDir dir;
    const std::string path = dir.file("broken.jsonl");
    write_text(path, "{\"schema_version\": 1,\n");
    CHECK_THROWS_AS(read_dataset(path), DataError);
    CHECK_THROWS_AS(read_dataset(dir.file("absent.jsonl")), DataError);
}

TEST_CASE("an empty file reads as an empty dataset") {
    TempDir dir;
    const std::string path = dir.file("empty.jsonl");
    write_text(path, "");
    const Dataset dataset = read_dataset(path);
    CHECK(dataset.samples.empty());
    CHECK(dataset.header.vocab.empty());
}

TEST_CASE("sample validation rejects each tampered invariant") {
    const Dataset dataset = generate_corpus(small_config());
    const DatasetHeader& header = dataset.header;
    const Sample& good = dataset.samples[0];

    Sample bad = good;
    bad.features.pop_back();
    CHECK_THROWS_AS(validate_sample(bad, header), DataError);

    bad = good;
    bad.ground_truth[0] = header.vocab_size();
    CHECK_THROWS_AS(validate_sample(bad, header), DataError);

    bad = good;
    bad.ground_truth.push_back(kEosToken);
    CHECK_THROWS_AS(validate_sample(bad, header), DataError);

    bad = good;
    bad.toys.push_back(bad.toys[0]);
    try {
        validate_sample(bad, header);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find(good.sample_id) != std::string::npos);
        CHECK(std::string(e.what()).find("duplicate") != std::string::npos);
    }

    // Erase a foreground mention: the toy's highest-level token becomes filler.
    bad = good;
    for (auto& toy : bad.toys) {
        if (toy.role != ToyRole::Foreground) continue;
        const int high = only_token(toy.names_at(PrecisionLevel::High)[0]);
        std::replace(bad.ground_truth.begin(), bad.ground_truth.end(), high, kFillerToken);
        // Low and medium mentions must go too; only the highest level is checked.
        std::replace(bad.ground_truth.begin(), bad.ground_truth.end(),
                     only_token(toy.names_at(PrecisionLevel::Low)[0]), kFillerToken);
        std::replace(bad.ground_truth.begin(), bad.ground_truth.end(),
                     only_token(toy.names_at(PrecisionLevel::Medium)[0]), kFillerToken);
        break;
    }
    CHECK_THROWS_AS(validate_sample(bad, header), DataError);

    bad = good;
    bad.toys[0].names_at(PrecisionLevel::Low) = bad.toys[0].names_at(PrecisionLevel::High);
    CHECK_THROWS_AS(validate_sample(bad, header), DataError);

    bad = good;
    bad.toys[0].names_at(PrecisionLevel::Medium).push_back(tok({}));
    CHECK_THROWS_AS(validate_sample(bad, header), DataError);
}

TEST_CASE("toy inventory is unique by canonical id, first occurrence wins") {
    const Dataset dataset = generate_corpus(small_config());
    const auto inventory = toy_inventory(dataset);
    CHECK_FALSE(inventory.empty());
    CHECK(inventory.size() <= static_cast<std::size_t>(small_config().n_toys));
    std::set<std::string> ids;
    for (const auto& toy : inventory) CHECK(ids.insert(toy.canonical_id).second);

    Dataset tiny;
    tiny.samples.resize(2);
    tiny.samples[0].toys = {make_toy("dup", ToyRole::Foreground, {tok({3})}, {}, {})};
    tiny.samples[1].toys = {make_toy("dup", ToyRole::Background, {tok({4})}, {}, {}),
                            make_toy("other", ToyRole::Background, {tok({5})}, {}, {})};
    const auto merged = toy_inventory(tiny);
    REQUIRE(merged.size() == 2);
    CHECK(merged[0].canonical_id == "dup");
    CHECK(merged[0].role == ToyRole::Foreground);
    CHECK(merged[1].canonical_id == "other");
}

TEST_CASE("enum string conversions round-trip and reject junk") {
    for (PrecisionLevel level : kAllLevels) {
        CHECK(precision_level_from_string(to_string(level)) == level);
    }
    CHECK(toy_role_from_string("background") == ToyRole::Background);
    CHECK(hardness_from_string("hard") == Hardness::Hard);
    CHECK_THROWS_AS(precision_level_from_string("ultra"), DataError);
    CHECK_THROWS_AS(toy_role_from_string("middleground"), DataError);
    CHECK_THROWS_AS(hardness_from_string(""), DataError);
}
