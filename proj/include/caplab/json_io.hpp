#pragma once

#include <json.hpp>

#include "caplab/metrics.hpp"
#include "caplab/rankstudy.hpp"
#include "caplab/reward.hpp"
#include "caplab/training.hpp"

// nlohmann ADL converters for the report and config types, shared by the
// training serializers and the CLI.

namespace caplab {

void to_json(nlohmann::json& j, const RewardConfig& config);
void from_json(const nlohmann::json& j, RewardConfig& config);

void to_json(nlohmann::json& j, const TrainerConfig& config);
void from_json(const nlohmann::json& j, TrainerConfig& config);

void to_json(nlohmann::json& j, const TtsReport& report);
void from_json(const nlohmann::json& j, TtsReport& report);

void to_json(nlohmann::json& j, const PrecisionReport& report);
void from_json(const nlohmann::json& j, PrecisionReport& report);

void to_json(nlohmann::json& j, const StepRecord& record);
void from_json(const nlohmann::json& j, StepRecord& record);

void to_json(nlohmann::json& j, const CorrelationRow& row);
void to_json(nlohmann::json& j, const CorrelationReport& report);

void to_json(nlohmann::json& j, const RankStudyConfig& config);
void to_json(nlohmann::json& j, const RankStudyReport& report);

}  // namespace caplab
