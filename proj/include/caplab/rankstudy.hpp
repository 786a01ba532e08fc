#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "caplab/reward.hpp"

namespace caplab {

// One ranking file: per image, candidate ids ordered best-first.
struct RankedImage {
    std::string image_id;
    std::vector<std::string> order;
};

struct RankingFile {
    std::vector<RankedImage> images;
};

// JSONL, one `{"image_id": str, "order": [str]}` object per line.
RankingFile read_rankings(const std::string& path);
std::string serialize_rankings(const RankingFile& rankings);

struct CorrelationRow {
    std::string image_id;
    double tau = 0.0;
    double rho = 0.0;
};

struct CorrelationReport {
    std::vector<CorrelationRow> rows;
    double mean_tau = 0.0;
    double mean_rho = 0.0;
};

// Per-image tau/rho between two ranking files covering the same images and,
// per image, the same candidate sets. Coverage mismatches throw DataError
// naming the offending ids.
CorrelationReport correlate_rankings(const RankingFile& a, const RankingFile& b);

struct RankStudyConfig {
    int images = 100;
    int captions_per_image = 5;
    // Probability that an image's planted ranking gets one adjacent swap.
    double noise = 0.2;
    std::uint64_t seed = 0;
    RewardConfig reward;
};

void validate(const RankStudyConfig& config);

struct RankStudyReport {
    RankStudyConfig config;
    CorrelationReport correlation;
    long long noisy_images = 0;
};

// Planted-quality validation harness: per image, synthetic captions with
// strictly increasing reward stand in for quality tiers; the reward-based
// ranking is correlated against the planted order, optionally perturbed by
// label noise. With zero noise the reward ranker reproduces the planted
// order exactly, so mean tau is 1.
RankStudyReport planted_quality_study(const RankStudyConfig& config);

}  // namespace caplab
