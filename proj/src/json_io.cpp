#include "caplab/json_io.hpp"

#include <algorithm>

namespace caplab {

using nlohmann::json;

namespace {

constexpr const char* kCellKeys[2][3] = {{"fl", "fm", "fh"}, {"bl", "bm", "bh"}};

}  // namespace

void to_json(json& j, const RewardConfig& config) {
    j = json{{"w_foreground", config.w_foreground},
             {"w_background", config.w_background},
             {"level_score", config.level_score},
             {"credit", to_string(config.credit)}};
}

void from_json(const json& j, RewardConfig& config) {
    config.w_foreground = j.at("w_foreground").get<double>();
    config.w_background = j.at("w_background").get<double>();
    const auto scores = j.at("level_score").get<std::vector<double>>();
    if (scores.size() != 3) throw DataError("reward.level_score must have 3 entries");
    std::copy(scores.begin(), scores.end(), config.level_score.begin());
    config.credit = level_credit_from_string(j.at("credit").get<std::string>());
}

void to_json(json& j, const TrainerConfig& config) {
    j = json{{"warmup_steps", config.warmup_steps},
             {"hybrid_steps", config.hybrid_steps},
             {"group_size", config.group_size},
             {"batch_size", config.batch_size},
             {"eps", config.eps},
             {"lr_sft", config.lr_sft},
             {"lr_grpo", config.lr_grpo},
             {"inner_steps", config.inner_steps},
             {"seed", config.seed},
             {"mode", to_string(config.mode)},
             {"buffer_policy", to_string(config.buffer_policy)},
             {"hybrid_split", to_string(config.hybrid_split)},
             {"eval_fraction", config.eval_fraction},
             {"eval_candidates", config.eval_candidates},
             {"eval_sample", config.eval_sample},
             {"pooling", to_string(config.pooling)},
             {"reward", config.reward}};
}

void from_json(const json& j, TrainerConfig& config) {
    config.warmup_steps = j.at("warmup_steps").get<int>();
    config.hybrid_steps = j.at("hybrid_steps").get<int>();
    config.group_size = j.at("group_size").get<int>();
    config.batch_size = j.at("batch_size").get<int>();
    config.eps = j.at("eps").get<double>();
    config.lr_sft = j.at("lr_sft").get<double>();
    config.lr_grpo = j.at("lr_grpo").get<double>();
    config.inner_steps = j.at("inner_steps").get<int>();
    config.seed = j.at("seed").get<std::uint64_t>();
    config.mode = train_mode_from_string(j.at("mode").get<std::string>());
    config.buffer_policy = buffer_policy_from_string(j.at("buffer_policy").get<std::string>());
    config.hybrid_split = hybrid_split_from_string(j.at("hybrid_split").get<std::string>());
    config.eval_fraction = j.at("eval_fraction").get<double>();
    config.eval_candidates = j.at("eval_candidates").get<int>();
    config.eval_sample = j.at("eval_sample").get<bool>();
    config.pooling = tts_pooling_from_string(j.at("pooling").get<std::string>());
    config.reward = j.at("reward").get<RewardConfig>();
}

void to_json(json& j, const TtsReport& report) {
    json cells = json::object();
    for (std::size_t r = 0; r < 2; ++r) {
        for (std::size_t l = 0; l < 3; ++l) {
            const CellStats& cell = report.cells[r][l];
            json entry{{"matched", cell.matched}, {"total", cell.total}};
            if (cell.rate) {
                entry["rate"] = *cell.rate;
            } else {
                entry["rate"] = nullptr;
            }
            cells[kCellKeys[r][l]] = std::move(entry);
        }
    }
    j = json{{"pooling", to_string(report.pooling)},
             {"aggregate", report.aggregate},
             {"aggregate_matched", report.aggregate_matched},
             {"aggregate_total", report.aggregate_total},
             {"cells", std::move(cells)}};
}

void from_json(const json& j, TtsReport& report) {
    report.pooling = tts_pooling_from_string(j.at("pooling").get<std::string>());
    report.aggregate = j.at("aggregate").get<double>();
    report.aggregate_matched = j.at("aggregate_matched").get<long long>();
    report.aggregate_total = j.at("aggregate_total").get<long long>();
    const json& cells = j.at("cells");
    for (std::size_t r = 0; r < 2; ++r) {
        for (std::size_t l = 0; l < 3; ++l) {
            const json& entry = cells.at(kCellKeys[r][l]);
            CellStats& cell = report.cells[r][l];
            cell.matched = entry.at("matched").get<long long>();
            cell.total = entry.at("total").get<long long>();
            cell.rate.reset();
            if (!entry.at("rate").is_null()) cell.rate = entry.at("rate").get<double>();
        }
    }
}

void to_json(json& j, const PrecisionReport& report) {
    j = json{{"images", report.images},
             {"predicted_total", report.predicted_total},
             {"correct_total", report.correct_total},
             {"mean_count", report.mean_count},
             {"pooled_precision",
              report.pooled_precision ? json(*report.pooled_precision) : json(nullptr)}};
}

void from_json(const json& j, PrecisionReport& report) {
    report.images = j.at("images").get<long long>();
    report.predicted_total = j.at("predicted_total").get<long long>();
    report.correct_total = j.at("correct_total").get<long long>();
    report.mean_count = j.at("mean_count").get<double>();
    report.pooled_precision.reset();
    if (!j.at("pooled_precision").is_null()) {
        report.pooled_precision = j.at("pooled_precision").get<double>();
    }
}

void to_json(json& j, const StepRecord& record) {
    j = json{{"step", record.step},
             {"branch", to_string(record.branch)},
             {"sample_ids", record.sample_ids},
             {"grad_norm", record.grad_norm},
             {"buffer_size", record.buffer_size}};
    if (record.branch == Branch::GrpoBranch) {
        j["rewards"] = record.rewards;
        j["mean_abs_advantage"] = record.mean_abs_advantage;
        j["is_zero_group"] = record.is_zero_group;
        j["is_uniform_group"] = record.is_uniform_group;
    }
    if (record.nll) j["nll"] = *record.nll;
}

void from_json(const json& j, StepRecord& record) {
    record = StepRecord{};
    record.step = j.at("step").get<long long>();
    record.branch = branch_from_string(j.at("branch").get<std::string>());
    record.sample_ids = j.at("sample_ids").get<std::vector<std::string>>();
    record.grad_norm = j.at("grad_norm").get<double>();
    record.buffer_size = j.at("buffer_size").get<long long>();
    if (j.contains("rewards")) record.rewards = j.at("rewards").get<std::vector<double>>();
    if (j.contains("mean_abs_advantage")) {
        record.mean_abs_advantage = j.at("mean_abs_advantage").get<double>();
    }
    if (j.contains("is_zero_group")) record.is_zero_group = j.at("is_zero_group").get<bool>();
    if (j.contains("is_uniform_group")) {
        record.is_uniform_group = j.at("is_uniform_group").get<bool>();
    }
    if (j.contains("nll")) record.nll = j.at("nll").get<double>();
}

void to_json(json& j, const CorrelationRow& row) {
    j = json{{"image_id", row.image_id}, {"tau", row.tau}, {"rho", row.rho}};
}

void to_json(json& j, const CorrelationReport& report) {
    j = json{{"mean_tau", report.mean_tau},
             {"mean_rho", report.mean_rho},
             {"images", report.rows.size()},
             {"rows", report.rows}};
}

void to_json(json& j, const RankStudyConfig& config) {
    j = json{{"images", config.images},
             {"captions_per_image", config.captions_per_image},
             {"noise", config.noise},
             {"seed", config.seed},
             {"reward", config.reward}};
}

void to_json(json& j, const RankStudyReport& report) {
    j = json{{"schema_version", 1},
             {"config", report.config},
             {"noisy_images", report.noisy_images},
             {"correlation", report.correlation}};
}

}  // namespace caplab
