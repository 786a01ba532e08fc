#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "caplab/corpus.hpp"
#include "caplab/metrics.hpp"
#include "caplab/policy.hpp"
#include "caplab/reward.hpp"
#include "caplab/rng.hpp"

namespace caplab {

enum class TrainMode { Sft, Grpo, Rsrs };
enum class Branch { SftWarmup, GrpoBranch, SftFromBuffer };
enum class BufferPolicy { Fifo, Random };
enum class HybridSplit { Shared, Disjoint };

std::string to_string(TrainMode mode);
std::string to_string(Branch branch);
std::string to_string(BufferPolicy policy);
std::string to_string(HybridSplit split);
TrainMode train_mode_from_string(const std::string& s);
Branch branch_from_string(const std::string& s);
BufferPolicy buffer_policy_from_string(const std::string& s);
HybridSplit hybrid_split_from_string(const std::string& s);

struct TrainerConfig {
    int warmup_steps = 2000;
    int hybrid_steps = 3000;
    int group_size = 4;
    int batch_size = 4;
    double eps = 0.2;
    double lr_sft = 0.05;
    double lr_grpo = 0.01;
    // Extra surrogate updates per group against fixed old log-probs; values
    // above 1 drive ratios away from 1 and exercise clipping.
    int inner_steps = 1;
    RewardConfig reward;
    std::uint64_t seed = 0;
    TrainMode mode = TrainMode::Rsrs;
    BufferPolicy buffer_policy = BufferPolicy::Fifo;
    HybridSplit hybrid_split = HybridSplit::Shared;
    double eval_fraction = 0.1;
    // Candidates generated per held-out sample at evaluation time. Greedy
    // decoding emits one deterministic candidate; sampled decoding draws
    // eval_candidates rollouts.
    int eval_candidates = 1;
    bool eval_sample = false;
    TtsPooling pooling = TtsPooling::Pooled;

    bool operator==(const TrainerConfig&) const = default;
};

// Throws ValidationError naming the offending field.
void validate(const TrainerConfig& config);

struct StepRecord {
    long long step = 0;  // 1-based, global across warm-up and hybrid stages
    Branch branch = Branch::SftWarmup;
    std::vector<std::string> sample_ids;
    std::vector<double> rewards;  // group rewards; empty on SFT branches
    double mean_abs_advantage = 0.0;
    double grad_norm = 0.0;
    long long buffer_size = 0;  // after the step
    bool is_zero_group = false;
    bool is_uniform_group = false;
    // Batch-mean sequence NLL; present on SFT branches only.
    std::optional<double> nll;
};

// FIFO (or seeded-random) queue of dataset indices whose whole group scored
// reward zero.
class ZeroRewardBuffer {
  public:
    ZeroRewardBuffer(BufferPolicy policy, std::uint64_t seed);

    void enqueue(std::size_t sample_index);
    std::vector<std::size_t> dequeue(int count);
    std::size_t size() const { return queue_.size(); }
    long long enqueued() const { return enqueued_; }
    long long dequeued() const { return dequeued_; }
    long long high_water() const { return high_water_; }

  private:
    BufferPolicy policy_;
    Rng rng_;
    std::deque<std::size_t> queue_;
    long long enqueued_ = 0;
    long long dequeued_ = 0;
    long long high_water_ = 0;
};

// Deterministic shuffled split; eval gets round(eval_fraction * n) samples.
struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> eval;
};
Split split_dataset(const Dataset& dataset, double eval_fraction, std::uint64_t seed);

// Mean per-sequence NLL over the given sample indices.
double holdout_nll(const PolicyModel& model, const Dataset& dataset,
                   const std::vector<std::size_t>& indices);

struct WarmupResult {
    std::vector<StepRecord> records;
    double initial_holdout_nll = 0.0;
    double final_holdout_nll = 0.0;
};

// warmup_steps mini-batch SFT steps over the epoch-shuffled train split.
// Holdout NLLs are measured on the eval split (on the train split itself when
// the eval split is empty).
WarmupResult run_warmup(PolicyModel& model, const Dataset& dataset, const TrainerConfig& config);

// One GRPO step on one sample: G rollouts, rewards, advantage normalization,
// clipped-surrogate update (a recorded exact no-op on uniform groups). The
// caller owns buffer bookkeeping and overwrites record.buffer_size.
StepRecord grpo_step(PolicyModel& model, const Sample& sample, const TrainerConfig& config,
                     Rng& rollout_rng, long long step_index);

struct TrainResult {
    PolicyModel model;
    std::vector<StepRecord> records;
    double initial_holdout_nll = 0.0;
    double final_holdout_nll = 0.0;
    long long buffer_enqueued = 0;
    long long buffer_dequeued = 0;
    long long buffer_final = 0;
    long long buffer_high_water = 0;
    Split split;
};

// Full training per config.mode: warm-up, then pure GRPO (mode Grpo) or the
// reward-conditional switch loop (mode Rsrs). Mode Sft stops after warm-up.
// A non-null initial model replaces the zero initialization.
TrainResult run_training(const TrainerConfig& config, const Dataset& dataset);
TrainResult run_training(const TrainerConfig& config, const Dataset& dataset,
                         const PolicyModel* initial);

struct ExperimentReport {
    int schema_version = 1;
    std::string corpus_hash;
    TrainerConfig config;
    long long n_samples = 0;
    long long n_train = 0;
    long long n_eval = 0;
    long long n_eval_hard = 0;
    std::map<std::string, long long> branch_counts;
    long long buffer_enqueued = 0;
    long long buffer_dequeued = 0;
    long long buffer_final = 0;
    long long buffer_high_water = 0;
    double initial_holdout_nll = 0.0;
    double final_holdout_nll = 0.0;
    TtsReport tts_overall;
    std::optional<TtsReport> tts_easy;
    std::optional<TtsReport> tts_hard;
    PrecisionReport precision;
};

// Caption candidates for one sample per the config's evaluation settings.
std::vector<Phrase> eval_candidates_for(const PolicyModel& model, const Sample& sample,
                                        const TrainerConfig& config, Rng& rng);

struct ExperimentOutput {
    ExperimentReport report;
    TrainResult train;
};

// Trains, evaluates on the held-out split, and writes telemetry.jsonl,
// checkpoint.json, report.json and plot.csv into out_dir. Pass a checkpoint
// to resume from; its corpus hash must match the dataset.
ExperimentOutput run_experiment(const TrainerConfig& config, const Dataset& dataset,
                                const std::string& out_dir,
                                const Checkpoint* init_checkpoint = nullptr);

std::string serialize_report(const ExperimentReport& report);
ExperimentReport parse_report(const std::string& text);

std::string serialize_telemetry(const ExperimentReport& report,
                                const std::vector<StepRecord>& records);
std::string serialize_plot_csv(const std::vector<StepRecord>& records);

struct TelemetryFile {
    std::string corpus_hash;
    TrainerConfig config;
    std::vector<StepRecord> records;
};
TelemetryFile parse_telemetry(const std::string& text);

}  // namespace caplab
