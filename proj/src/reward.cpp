#include "caplab/reward.hpp"

#include <algorithm>
#include <cmath>

#include "caplab/metrics.hpp"

namespace caplab {

std::string to_string(LevelCredit credit) {
    switch (credit) {
        case LevelCredit::Highest: return "highest";
        case LevelCredit::PerLevel: return "per_level";
    }
    throw InternalError("invalid LevelCredit value");
}

LevelCredit level_credit_from_string(const std::string& s) {
    if (s == "highest") return LevelCredit::Highest;
    if (s == "per_level") return LevelCredit::PerLevel;
    throw ValidationError("unknown level credit \"" + s + "\" (want highest or per_level)");
}

void validate(const RewardConfig& config) {
    if (config.w_foreground < 0.0) throw ValidationError("w_foreground must be nonnegative");
    if (config.w_background < 0.0) throw ValidationError("w_background must be nonnegative");
    if (!(config.level_score[0] < config.level_score[1] &&
          config.level_score[1] < config.level_score[2])) {
        throw ValidationError("level_score must be strictly increasing in precision level");
    }
}

double reward(const Phrase& caption, const std::vector<ToyAnnotation>& toys,
              const RewardConfig& config) {
    double total = 0.0;
    for (const auto& toy : toys) {
        const double w =
            toy.role == ToyRole::Foreground ? config.w_foreground : config.w_background;
        double contribution = 0.0;
        for (PrecisionLevel level : kAllLevels) {
            if (!match_toy(caption, toy.names_at(level))) continue;
            const double term = w * config.level_score[static_cast<std::size_t>(level)];
            if (config.credit == LevelCredit::PerLevel) {
                contribution += term;
            } else {
                contribution = std::max(contribution, term);
            }
        }
        total += contribution;
    }
    return total;
}

GroupRewards normalize_advantages(const std::vector<double>& rewards) {
    if (rewards.size() < 2) {
        throw ValidationError("normalize_advantages: need a group of at least 2 rewards");
    }
    GroupRewards group;
    group.rewards = rewards;
    group.is_zero_group = std::all_of(rewards.begin(), rewards.end(),
                                      [](double r) { return r == 0.0; });
    group.is_uniform_group = std::all_of(rewards.begin(), rewards.end(),
                                         [&](double r) { return r == rewards.front(); });
    group.advantages.assign(rewards.size(), 0.0);
    if (group.is_uniform_group) return group;

    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= static_cast<double>(rewards.size());
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= static_cast<double>(rewards.size());
    const double std_dev = std::sqrt(var);
    for (std::size_t i = 0; i < rewards.size(); ++i) {
        group.advantages[i] = (rewards[i] - mean) / std_dev;
    }
    return group;
}

}  // namespace caplab
