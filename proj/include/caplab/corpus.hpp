#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "caplab/common.hpp"

namespace caplab {

enum class PrecisionLevel { Low = 0, Medium = 1, High = 2 };
enum class ToyRole { Foreground, Background };
enum class Hardness { Easy, Hard };

inline constexpr std::array<PrecisionLevel, 3> kAllLevels = {
    PrecisionLevel::Low, PrecisionLevel::Medium, PrecisionLevel::High};

std::string to_string(PrecisionLevel level);
std::string to_string(ToyRole role);
std::string to_string(Hardness hardness);
PrecisionLevel precision_level_from_string(const std::string& s);
ToyRole toy_role_from_string(const std::string& s);
Hardness hardness_from_string(const std::string& s);

using TokenSeq = std::vector<int>;

// A caption or toy name: token ids in synthetic mode, raw text in text mode.
using Phrase = std::variant<TokenSeq, std::string>;

// Reserved token ids used by the synthetic generator and the policy.
inline constexpr int kEosToken = 0;
inline constexpr int kFillerToken = 1;
inline constexpr int kBosToken = 2;
inline constexpr int kFirstToyToken = 3;

struct ToyAnnotation {
    std::string canonical_id;
    ToyRole role = ToyRole::Foreground;
    // Indexed by PrecisionLevel; a level with no names holds an empty list,
    // it is never omitted.
    std::array<std::vector<Phrase>, 3> names;

    const std::vector<Phrase>& names_at(PrecisionLevel level) const {
        return names[static_cast<std::size_t>(level)];
    }
    std::vector<Phrase>& names_at(PrecisionLevel level) {
        return names[static_cast<std::size_t>(level)];
    }
    bool has_level(PrecisionLevel level) const { return !names_at(level).empty(); }
    std::optional<PrecisionLevel> highest_populated() const;

    bool operator==(const ToyAnnotation&) const = default;
};

struct Sample {
    std::string sample_id;
    std::vector<double> features;
    int prompt_id = 0;
    TokenSeq ground_truth;
    std::vector<ToyAnnotation> toys;
    Hardness hardness = Hardness::Easy;

    bool operator==(const Sample&) const = default;
};

struct CorpusConfig {
    int vocab_size = 96;
    int feature_dim = 16;
    int caption_length = 8;
    int n_samples = 1000;
    double hard_fraction = 0.0;
    int toys_per_sample_min = 2;
    int toys_per_sample_max = 4;
    int n_toys = 24;
    double noise_sigma = 0.1;
    // Scale applied to hard toys' feature directions. 1.0 keeps all
    // directions unit length; lower values make hard toys weaker signals.
    double hard_signal_scale = 0.3;
    double background_mention_rate = 0.5;
    std::uint64_t seed = 0;

    bool operator==(const CorpusConfig&) const = default;
};

// Throws ValidationError naming the offending field.
void validate(const CorpusConfig& config);

struct DatasetHeader {
    int schema_version = 1;
    std::vector<std::string> vocab;
    int feature_dim = 0;
    int caption_length = 0;
    // Generating config, embedded for provenance; absent on files written by
    // other tools.
    std::optional<CorpusConfig> config;

    int vocab_size() const { return static_cast<int>(vocab.size()); }
    bool operator==(const DatasetHeader&) const = default;
};

struct Dataset {
    DatasetHeader header;
    std::vector<Sample> samples;

    bool operator==(const Dataset&) const = default;
};

// Deterministic synthetic corpus. Identical configs produce identical
// datasets; per-sample draws run on streams derived as seed xor index.
Dataset generate_corpus(const CorpusConfig& config);

// Canonical on-disk form: header line followed by one JSON object per sample.
std::string serialize_dataset(const Dataset& dataset);
void write_dataset(const Dataset& dataset, const std::string& path);
Dataset read_dataset(const std::string& path);

// FNV-1a over the canonical serialization, as 16 hex digits.
std::string corpus_hash(const Dataset& dataset);

// Validates every Sample invariant against the header; throws DataError with
// the sample id on violation. The reader applies this to each record.
void validate_sample(const Sample& sample, const DatasetHeader& header);

// Unique toys across the dataset keyed by canonical_id (first occurrence wins).
std::vector<ToyAnnotation> toy_inventory(const Dataset& dataset);

}  // namespace caplab
