#pragma once

#include <array>
#include <string>
#include <vector>

#include "caplab/corpus.hpp"

namespace caplab {

enum class LevelCredit {
    // A toy matched at several levels credits only the highest one.
    Highest,
    // Every matched level contributes its own term.
    PerLevel,
};

std::string to_string(LevelCredit credit);
LevelCredit level_credit_from_string(const std::string& s);

struct RewardConfig {
    double w_foreground = 1.0;
    double w_background = 0.5;
    // Indexed by PrecisionLevel.
    std::array<double, 3> level_score = {1.0, 2.0, 3.0};
    LevelCredit credit = LevelCredit::Highest;

    bool operator==(const RewardConfig&) const = default;
};

// Throws ValidationError naming the offending field.
void validate(const RewardConfig& config);

// Domain reward of one caption against the sample's annotated toys: each toy
// contributes role_weight * level_score at its credited matched level(s).
double reward(const Phrase& caption, const std::vector<ToyAnnotation>& toys,
              const RewardConfig& config);

struct GroupRewards {
    std::vector<double> rewards;
    std::vector<double> advantages;
    bool is_zero_group = false;
    bool is_uniform_group = false;
};

// Within-group reward z-scores with population standard deviation. A uniform
// group (all rewards equal) short-circuits to all-zero advantages; there is
// no epsilon in the denominator. Throws ValidationError when G < 2.
GroupRewards normalize_advantages(const std::vector<double>& rewards);

}  // namespace caplab
