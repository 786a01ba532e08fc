#include "caplab/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "caplab/json_io.hpp"

namespace caplab {

using nlohmann::json;

namespace {

// Stream tags: every consumer of randomness gets its own rng derived from the
// run seed so that stages cannot perturb each other.
constexpr std::uint64_t kSplitTag = 0x73706c69742d3031ULL;
constexpr std::uint64_t kWarmupTag = 0x7761726d75702d31ULL;
constexpr std::uint64_t kHybridTag = 0x6879627269642d31ULL;
constexpr std::uint64_t kRolloutTag = 0x726f6c6c6f75742dULL;
constexpr std::uint64_t kBufferTag = 0x6275666665722d31ULL;
constexpr std::uint64_t kEvalTag = 0x6576616c2d312d31ULL;

void shuffle_indices(std::vector<std::size_t>& indices, Rng& rng) {
    for (std::size_t i = indices.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<long long>(i) - 1));
        std::swap(indices[i - 1], indices[j]);
    }
}

}  // namespace

std::string to_string(TrainMode mode) {
    switch (mode) {
        case TrainMode::Sft: return "sft";
        case TrainMode::Grpo: return "grpo";
        case TrainMode::Rsrs: return "rsrs";
    }
    throw InternalError("invalid TrainMode value");
}

std::string to_string(Branch branch) {
    switch (branch) {
        case Branch::SftWarmup: return "sft_warmup";
        case Branch::GrpoBranch: return "grpo";
        case Branch::SftFromBuffer: return "sft_from_buffer";
    }
    throw InternalError("invalid Branch value");
}

std::string to_string(BufferPolicy policy) {
    switch (policy) {
        case BufferPolicy::Fifo: return "fifo";
        case BufferPolicy::Random: return "random";
    }
    throw InternalError("invalid BufferPolicy value");
}

std::string to_string(HybridSplit split) {
    switch (split) {
        case HybridSplit::Shared: return "shared";
        case HybridSplit::Disjoint: return "disjoint";
    }
    throw InternalError("invalid HybridSplit value");
}

TrainMode train_mode_from_string(const std::string& s) {
    if (s == "sft") return TrainMode::Sft;
    if (s == "grpo") return TrainMode::Grpo;
    if (s == "rsrs") return TrainMode::Rsrs;
    throw ValidationError("unknown mode \"" + s + "\" (want sft, grpo or rsrs)");
}

Branch branch_from_string(const std::string& s) {
    if (s == "sft_warmup") return Branch::SftWarmup;
    if (s == "grpo") return Branch::GrpoBranch;
    if (s == "sft_from_buffer") return Branch::SftFromBuffer;
    throw DataError("unknown branch \"" + s + "\"");
}

BufferPolicy buffer_policy_from_string(const std::string& s) {
    if (s == "fifo") return BufferPolicy::Fifo;
    if (s == "random") return BufferPolicy::Random;
    throw ValidationError("unknown buffer policy \"" + s + "\" (want fifo or random)");
}

HybridSplit hybrid_split_from_string(const std::string& s) {
    if (s == "shared") return HybridSplit::Shared;
    if (s == "disjoint") return HybridSplit::Disjoint;
    throw ValidationError("unknown hybrid split \"" + s + "\" (want shared or disjoint)");
}

void validate(const TrainerConfig& config) {
    if (config.warmup_steps < 0) throw ValidationError("warmup_steps must be nonnegative");
    if (config.hybrid_steps < 0) throw ValidationError("hybrid_steps must be nonnegative");
    if (config.group_size < 2) throw ValidationError("group_size must be at least 2");
    if (config.batch_size < 1) throw ValidationError("batch_size must be at least 1");
    if (config.eps <= 0.0) throw ValidationError("eps must be positive");
    if (config.lr_sft <= 0.0) throw ValidationError("lr_sft must be positive");
    if (config.lr_grpo <= 0.0) throw ValidationError("lr_grpo must be positive");
    if (config.inner_steps < 1) throw ValidationError("inner_steps must be at least 1");
    if (!(config.eval_fraction >= 0.0 && config.eval_fraction < 1.0)) {
        throw ValidationError("eval_fraction must lie in [0, 1)");
    }
    if (config.eval_candidates < 1) throw ValidationError("eval_candidates must be at least 1");
    validate(config.reward);
}

ZeroRewardBuffer::ZeroRewardBuffer(BufferPolicy policy, std::uint64_t seed)
    : policy_(policy), rng_(seed) {}

void ZeroRewardBuffer::enqueue(std::size_t sample_index) {
    queue_.push_back(sample_index);
    ++enqueued_;
    high_water_ = std::max(high_water_, static_cast<long long>(queue_.size()));
}

std::vector<std::size_t> ZeroRewardBuffer::dequeue(int count) {
    if (count < 0 || static_cast<std::size_t>(count) > queue_.size()) {
        throw InternalError("buffer dequeue of " + std::to_string(count) + " from " +
                            std::to_string(queue_.size()) + " entries");
    }
    std::vector<std::size_t> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        if (policy_ == BufferPolicy::Fifo) {
            out.push_back(queue_.front());
            queue_.pop_front();
        } else {
            const std::size_t j = static_cast<std::size_t>(
                rng_.uniform_int(0, static_cast<long long>(queue_.size()) - 1));
            out.push_back(queue_[j]);
            queue_.erase(queue_.begin() + static_cast<std::ptrdiff_t>(j));
        }
    }
    dequeued_ += count;
    return out;
}

Split split_dataset(const Dataset& dataset, double eval_fraction, std::uint64_t seed) {
    if (!(eval_fraction >= 0.0 && eval_fraction < 1.0)) {
        throw ValidationError("eval_fraction must lie in [0, 1)");
    }
    const std::size_t n = dataset.samples.size();
    std::vector<std::size_t> indices(n);
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    Rng rng(splitmix64(seed ^ kSplitTag));
    shuffle_indices(indices, rng);
    const std::size_t n_eval = static_cast<std::size_t>(
        std::llround(eval_fraction * static_cast<double>(n)));
    Split split;
    split.eval.assign(indices.begin(), indices.begin() + static_cast<std::ptrdiff_t>(n_eval));
    split.train.assign(indices.begin() + static_cast<std::ptrdiff_t>(n_eval), indices.end());
    return split;
}

double holdout_nll(const PolicyModel& model, const Dataset& dataset,
                   const std::vector<std::size_t>& indices) {
    if (indices.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t idx : indices) {
        const Sample& sample = dataset.samples.at(idx);
        total -= logprob(model, sample.features, sample.ground_truth).total;
    }
    return total / static_cast<double>(indices.size());
}

namespace {

// Warm-up pool and hybrid pool; identical unless the split is disjoint.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stage_pools(
    const Split& split, HybridSplit mode) {
    if (mode == HybridSplit::Shared) return {split.train, split.train};
    const std::size_t half = split.train.size() / 2;
    std::vector<std::size_t> warm(split.train.begin(),
                                  split.train.begin() + static_cast<std::ptrdiff_t>(half));
    std::vector<std::size_t> hybrid(split.train.begin() + static_cast<std::ptrdiff_t>(half),
                                    split.train.end());
    return {warm, hybrid};
}

// Draws the next batch_size indices from an endlessly reshuffled permutation.
class EpochSampler {
  public:
    EpochSampler(std::vector<std::size_t> pool, Rng rng) : pool_(std::move(pool)), rng_(rng) {
        if (pool_.empty()) throw InternalError("epoch sampler over an empty pool");
        shuffle_indices(pool_, rng_);
    }

    std::size_t next() {
        if (pos_ == pool_.size()) {
            shuffle_indices(pool_, rng_);
            pos_ = 0;
        }
        return pool_[pos_++];
    }

  private:
    std::vector<std::size_t> pool_;
    Rng rng_;
    std::size_t pos_ = 0;
};

StepRecord sft_batch_step(PolicyModel& model, const Dataset& dataset,
                          const std::vector<std::size_t>& batch, double lr, Branch branch,
                          long long step_index) {
    if (batch.empty()) throw InternalError("empty SFT batch");
    StepRecord record;
    record.step = step_index;
    record.branch = branch;
    PolicyGrad grad = PolicyGrad::zeros_like(model);
    const double scale = 1.0 / static_cast<double>(batch.size());
    double nll_sum = 0.0;
    for (std::size_t idx : batch) {
        const Sample& sample = dataset.samples.at(idx);
        record.sample_ids.push_back(sample.sample_id);
        nll_sum -= logprob(model, sample.features, sample.ground_truth).total;
        grad.accumulate(grad_nll(model, sample.features, sample.ground_truth), scale);
    }
    record.nll = nll_sum * scale;
    record.grad_norm = grad.norm();
    sgd_step(model, grad, lr);
    return record;
}

}  // namespace

WarmupResult run_warmup(PolicyModel& model, const Dataset& dataset, const TrainerConfig& config) {
    validate(config);
    const Split split = split_dataset(dataset, config.eval_fraction, config.seed);
    auto [warm_pool, hybrid_pool] = stage_pools(split, config.hybrid_split);
    (void)hybrid_pool;
    WarmupResult result;
    if (config.warmup_steps == 0) {
        const auto& holdout = split.eval.empty() ? warm_pool : split.eval;
        result.initial_holdout_nll = holdout_nll(model, dataset, holdout);
        result.final_holdout_nll = result.initial_holdout_nll;
        return result;
    }
    if (warm_pool.empty()) {
        throw ValidationError("warm-up requested on an empty training split");
    }
    const auto& holdout = split.eval.empty() ? warm_pool : split.eval;
    result.initial_holdout_nll = holdout_nll(model, dataset, holdout);

    EpochSampler sampler(warm_pool, Rng(splitmix64(config.seed ^ kWarmupTag)));
    for (int step = 1; step <= config.warmup_steps; ++step) {
        std::vector<std::size_t> batch;
        batch.reserve(static_cast<std::size_t>(config.batch_size));
        for (int i = 0; i < config.batch_size; ++i) batch.push_back(sampler.next());
        result.records.push_back(
            sft_batch_step(model, dataset, batch, config.lr_sft, Branch::SftWarmup, step));
    }
    result.final_holdout_nll = holdout_nll(model, dataset, holdout);
    return result;
}

StepRecord grpo_step(PolicyModel& model, const Sample& sample, const TrainerConfig& config,
                     Rng& rollout_rng, long long step_index) {
    const std::vector<Rollout> rollouts =
        sample_group(model, sample.features, config.group_size, rollout_rng);
    std::vector<double> rewards;
    rewards.reserve(rollouts.size());
    for (const auto& rollout : rollouts) {
        rewards.push_back(reward(Phrase(rollout.tokens), sample.toys, config.reward));
    }
    const GroupRewards group = normalize_advantages(rewards);

    StepRecord record;
    record.step = step_index;
    record.branch = Branch::GrpoBranch;
    record.sample_ids.push_back(sample.sample_id);
    record.rewards = group.rewards;
    record.is_zero_group = group.is_zero_group;
    record.is_uniform_group = group.is_uniform_group;
    double abs_sum = 0.0;
    for (double a : group.advantages) abs_sum += std::abs(a);
    record.mean_abs_advantage = abs_sum / static_cast<double>(group.advantages.size());

    for (int inner = 0; inner < config.inner_steps; ++inner) {
        PolicyGrad grad =
            grad_grpo(model, sample.features, rollouts, group.advantages, config.eps);
        if (inner == 0) record.grad_norm = grad.norm();
        grad.scale(-1.0);  // ascent direction -> descent gradient
        sgd_step(model, grad, config.lr_grpo);
    }
    return record;
}

TrainResult run_training(const TrainerConfig& config, const Dataset& dataset) {
    return run_training(config, dataset, nullptr);
}

TrainResult run_training(const TrainerConfig& config, const Dataset& dataset,
                         const PolicyModel* initial) {
    validate(config);
    TrainResult result;
    if (initial) {
        if (initial->vocab_size != dataset.header.vocab_size() ||
            initial->feature_dim != dataset.header.feature_dim ||
            initial->caption_length != dataset.header.caption_length) {
            throw DataError("initial model shapes do not match the dataset header");
        }
        result.model = *initial;
    } else {
        result.model = PolicyModel::for_dataset(dataset.header);
    }

    WarmupResult warmup = run_warmup(result.model, dataset, config);
    result.records = std::move(warmup.records);
    result.initial_holdout_nll = warmup.initial_holdout_nll;
    result.final_holdout_nll = warmup.final_holdout_nll;
    result.split = split_dataset(dataset, config.eval_fraction, config.seed);

    if (config.mode == TrainMode::Sft || config.hybrid_steps == 0) return result;

    auto [warm_pool, hybrid_pool] = stage_pools(result.split, config.hybrid_split);
    (void)warm_pool;
    if (hybrid_pool.empty()) {
        throw ValidationError("hybrid stage requested on an empty training split");
    }

    Rng hybrid_rng(splitmix64(config.seed ^ kHybridTag));
    Rng rollout_rng(splitmix64(config.seed ^ kRolloutTag));
    ZeroRewardBuffer buffer(config.buffer_policy, splitmix64(config.seed ^ kBufferTag));
    long long step = config.warmup_steps;

    for (int t = 0; t < config.hybrid_steps; ++t) {
        ++step;
        if (config.mode == TrainMode::Rsrs &&
            buffer.size() >= static_cast<std::size_t>(config.batch_size)) {
            const std::vector<std::size_t> batch = buffer.dequeue(config.batch_size);
            StepRecord record = sft_batch_step(result.model, dataset, batch, config.lr_sft,
                                               Branch::SftFromBuffer, step);
            record.buffer_size = static_cast<long long>(buffer.size());
            result.records.push_back(std::move(record));
            continue;
        }
        const std::size_t idx = hybrid_pool[static_cast<std::size_t>(
            hybrid_rng.uniform_int(0, static_cast<long long>(hybrid_pool.size()) - 1))];
        StepRecord record =
            grpo_step(result.model, dataset.samples.at(idx), config, rollout_rng, step);
        if (config.mode == TrainMode::Rsrs) {
            const double reward_sum =
                std::accumulate(record.rewards.begin(), record.rewards.end(), 0.0);
            if (reward_sum == 0.0) buffer.enqueue(idx);
        }
        record.buffer_size = static_cast<long long>(buffer.size());
        result.records.push_back(std::move(record));
    }

    result.buffer_enqueued = buffer.enqueued();
    result.buffer_dequeued = buffer.dequeued();
    result.buffer_final = static_cast<long long>(buffer.size());
    result.buffer_high_water = buffer.high_water();
    return result;
}

std::vector<Phrase> eval_candidates_for(const PolicyModel& model, const Sample& sample,
                                        const TrainerConfig& config, Rng& rng) {
    std::vector<Phrase> candidates;
    if (!config.eval_sample) {
        candidates.emplace_back(greedy_decode(model, sample.features));
        return candidates;
    }
    for (const auto& rollout : sample_group(model, sample.features, config.eval_candidates, rng)) {
        candidates.emplace_back(rollout.tokens);
    }
    return candidates;
}

namespace {

std::string fmt_double(double value) { return json(value).dump(); }

}  // namespace

std::string serialize_report(const ExperimentReport& report) {
    json obj{{"schema_version", report.schema_version},
             {"corpus_hash", report.corpus_hash},
             {"config", report.config},
             {"n_samples", report.n_samples},
             {"n_train", report.n_train},
             {"n_eval", report.n_eval},
             {"n_eval_hard", report.n_eval_hard},
             {"branch_counts", report.branch_counts},
             {"buffer",
              json{{"enqueued", report.buffer_enqueued},
                   {"dequeued", report.buffer_dequeued},
                   {"final", report.buffer_final},
                   {"high_water", report.buffer_high_water}}},
             {"initial_holdout_nll", report.initial_holdout_nll},
             {"final_holdout_nll", report.final_holdout_nll},
             {"tts", report.tts_overall},
             {"tts_easy", report.tts_easy ? json(*report.tts_easy) : json(nullptr)},
             {"tts_hard", report.tts_hard ? json(*report.tts_hard) : json(nullptr)},
             {"precision", report.precision}};
    return obj.dump(2) + "\n";
}

ExperimentReport parse_report(const std::string& text) {
    json obj;
    try {
        obj = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("invalid report JSON: ") + e.what());
    }
    try {
        ExperimentReport report;
        report.schema_version = obj.at("schema_version").get<int>();
        if (report.schema_version != 1) throw DataError("unsupported report schema_version");
        report.corpus_hash = obj.at("corpus_hash").get<std::string>();
        report.config = obj.at("config").get<TrainerConfig>();
        report.n_samples = obj.at("n_samples").get<long long>();
        report.n_train = obj.at("n_train").get<long long>();
        report.n_eval = obj.at("n_eval").get<long long>();
        report.n_eval_hard = obj.at("n_eval_hard").get<long long>();
        report.branch_counts =
            obj.at("branch_counts").get<std::map<std::string, long long>>();
        const json& buffer = obj.at("buffer");
        report.buffer_enqueued = buffer.at("enqueued").get<long long>();
        report.buffer_dequeued = buffer.at("dequeued").get<long long>();
        report.buffer_final = buffer.at("final").get<long long>();
        report.buffer_high_water = buffer.at("high_water").get<long long>();
        report.initial_holdout_nll = obj.at("initial_holdout_nll").get<double>();
        report.final_holdout_nll = obj.at("final_holdout_nll").get<double>();
        report.tts_overall = obj.at("tts").get<TtsReport>();
        if (!obj.at("tts_easy").is_null()) {
            report.tts_easy = obj.at("tts_easy").get<TtsReport>();
        }
        if (!obj.at("tts_hard").is_null()) {
            report.tts_hard = obj.at("tts_hard").get<TtsReport>();
        }
        report.precision = obj.at("precision").get<PrecisionReport>();
        return report;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed report: ") + e.what());
    }
}

std::string serialize_telemetry(const ExperimentReport& report,
                                const std::vector<StepRecord>& records) {
    json header{{"schema_version", 1},
                {"kind", "telemetry"},
                {"corpus_hash", report.corpus_hash},
                {"config", report.config}};
    std::string out = header.dump();
    out += '\n';
    for (const auto& record : records) {
        out += json(record).dump();
        out += '\n';
    }
    return out;
}

TelemetryFile parse_telemetry(const std::string& text) {
    TelemetryFile file;
    std::size_t pos = 0;
    long line_no = 0;
    bool have_header = false;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        const std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError("telemetry line " + std::to_string(line_no) + ": invalid JSON: " +
                            e.what());
        }
        try {
            if (!have_header) {
                if (obj.at("schema_version").get<int>() != 1) {
                    throw DataError("unsupported telemetry schema_version");
                }
                file.corpus_hash = obj.at("corpus_hash").get<std::string>();
                file.config = obj.at("config").get<TrainerConfig>();
                have_header = true;
            } else {
                file.records.push_back(obj.get<StepRecord>());
            }
        } catch (const json::exception& e) {
            throw DataError("telemetry line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!have_header) throw DataError("telemetry is empty, header line missing");
    return file;
}

std::string serialize_plot_csv(const std::vector<StepRecord>& records) {
    std::string out = "step,branch,mean_group_reward,buffer_size,grad_norm\n";
    for (const auto& record : records) {
        out += std::to_string(record.step);
        out += ',';
        out += to_string(record.branch);
        out += ',';
        if (!record.rewards.empty()) {
            const double mean =
                std::accumulate(record.rewards.begin(), record.rewards.end(), 0.0) /
                static_cast<double>(record.rewards.size());
            out += fmt_double(mean);
        }
        out += ',';
        out += std::to_string(record.buffer_size);
        out += ',';
        out += fmt_double(record.grad_norm);
        out += '\n';
    }
    return out;
}

namespace {

void write_text_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open \"" + path + "\" for writing");
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out) throw DataError("write failed for \"" + path + "\"");
}

std::optional<TtsReport> tts_slice(const std::vector<Sample>& samples,
                                   const std::vector<std::vector<Phrase>>& candidates,
                                   TtsPooling pooling) {
    if (samples.empty()) return std::nullopt;
    try {
        return tts(samples, candidates, pooling);
    } catch (const ValidationError&) {
        // A slice whose samples annotate no toy instance is reported absent.
        return std::nullopt;
    }
}

}  // namespace

ExperimentOutput run_experiment(const TrainerConfig& config, const Dataset& dataset,
                                const std::string& out_dir,
                                const Checkpoint* init_checkpoint) {
    validate(config);
    const std::string hash = corpus_hash(dataset);
    const PolicyModel* initial = nullptr;
    if (init_checkpoint) {
        if (init_checkpoint->corpus_hash != hash) {
            throw DataError("checkpoint corpus hash " + init_checkpoint->corpus_hash +
                            " does not match dataset corpus hash " + hash);
        }
        initial = &init_checkpoint->model;
    }

    ExperimentOutput output{.report = {}, .train = run_training(config, dataset, initial)};
    ExperimentReport& report = output.report;
    report.corpus_hash = hash;
    report.config = config;
    report.n_samples = static_cast<long long>(dataset.samples.size());
    report.n_train = static_cast<long long>(output.train.split.train.size());
    for (const auto& record : output.train.records) {
        report.branch_counts[to_string(record.branch)] += 1;
    }
    report.buffer_enqueued = output.train.buffer_enqueued;
    report.buffer_dequeued = output.train.buffer_dequeued;
    report.buffer_final = output.train.buffer_final;
    report.buffer_high_water = output.train.buffer_high_water;
    report.initial_holdout_nll = output.train.initial_holdout_nll;
    report.final_holdout_nll = output.train.final_holdout_nll;

    // Evaluate on the held-out split, falling back to the training split when
    // eval_fraction is 0.
    const std::vector<std::size_t>& eval_indices =
        output.train.split.eval.empty() ? output.train.split.train : output.train.split.eval;
    Rng eval_rng(splitmix64(config.seed ^ kEvalTag));
    std::vector<Sample> eval_samples;
    std::vector<std::vector<Phrase>> candidates;
    std::vector<Sample> easy_samples;
    std::vector<std::vector<Phrase>> easy_candidates;
    std::vector<Sample> hard_samples;
    std::vector<std::vector<Phrase>> hard_candidates;
    for (std::size_t idx : eval_indices) {
        const Sample& sample = dataset.samples.at(idx);
        auto sample_candidates = eval_candidates_for(output.train.model, sample, config, eval_rng);
        eval_samples.push_back(sample);
        if (sample.hardness == Hardness::Hard) {
            hard_samples.push_back(sample);
            hard_candidates.push_back(sample_candidates);
        } else {
            easy_samples.push_back(sample);
            easy_candidates.push_back(sample_candidates);
        }
        candidates.push_back(std::move(sample_candidates));
    }
    report.n_eval = static_cast<long long>(eval_samples.size());
    report.n_eval_hard = static_cast<long long>(hard_samples.size());
    report.tts_overall = tts(eval_samples, candidates, config.pooling);
    report.tts_easy = tts_slice(easy_samples, easy_candidates, config.pooling);
    report.tts_hard = tts_slice(hard_samples, hard_candidates, config.pooling);
    report.precision = precision_report(eval_samples, candidates, toy_inventory(dataset));

    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw DataError("cannot create output directory \"" + out_dir + "\": " + ec.message());
    write_text_file((fs::path(out_dir) / "telemetry.jsonl").string(),
                    serialize_telemetry(report, output.train.records));
    write_text_file((fs::path(out_dir) / "report.json").string(), serialize_report(report));
    write_text_file((fs::path(out_dir) / "plot.csv").string(),
                    serialize_plot_csv(output.train.records));
    save_checkpoint(output.train.model, hash, (fs::path(out_dir) / "checkpoint.json").string(),
                    json{{"config", config}}.dump());
    return output;
}

}  // namespace caplab
