#include "caplab/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cerrno>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "caplab/common.hpp"
#include "caplab/json_io.hpp"
#include "caplab/metrics.hpp"
#include "caplab/policy.hpp"
#include "caplab/rankstudy.hpp"
#include "caplab/reward.hpp"
#include "caplab/training.hpp"

namespace caplab {
namespace {

using nlohmann::json;

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open \"" + path + "\"");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write \"" + path + "\"");
    out << content;
}

std::string fmt4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

std::string fmt2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

// Exclusive-create lock file in a run directory; removed on destruction so a
// crashed run can be diagnosed by the stale lock it leaves behind.
class RunLock {
  public:
    explicit RunLock(const std::string& dir)
        : path_((std::filesystem::path(dir) / ".lock").string()) {
        std::FILE* f = std::fopen(path_.c_str(), "wx");
        if (f == nullptr) {
            if (errno == EEXIST) {
                throw ValidationError("output directory \"" + dir +
                                      "\" already holds a run lock; remove " + path_ +
                                      " if the previous run is dead");
            }
            throw DataError("cannot create lock file \"" + path_ + "\"");
        }
        std::fclose(f);
    }
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;
    ~RunLock() { std::remove(path_.c_str()); }

  private:
    std::string path_;
};

Phrase phrase_from_json(const json& j, const std::string& where) {
    if (j.is_string()) return Phrase(j.get<std::string>());
    if (j.is_array()) {
        TokenSeq tokens;
        tokens.reserve(j.size());
        for (const auto& t : j) {
            if (!t.is_number_integer()) {
                throw DataError(where + ": token candidates must be arrays of integers");
            }
            tokens.push_back(t.get<int>());
        }
        return Phrase(std::move(tokens));
    }
    throw DataError(where + ": each candidate must be a token array or a string");
}

void print_tts(std::ostream& out, const TtsReport& report, const std::string& label) {
    out << label << " (pooling: " << to_string(report.pooling) << ")\n";
    static const char* kCellNames[2][3] = {{"TTS-FL", "TTS-FM", "TTS-FH"},
                                           {"TTS-BL", "TTS-BM", "TTS-BH"}};
    for (int role = 0; role < 2; ++role) {
        for (int level = 0; level < 3; ++level) {
            const CellStats& cell = report.cells[role][level];
            out << "  " << kCellNames[role][level] << "  ";
            if (cell.rate.has_value()) {
                out << fmt4(*cell.rate) << "  (" << cell.matched << "/" << cell.total << ")\n";
            } else {
                out << "absent  (no instances)\n";
            }
        }
    }
    out << "  aggregate  " << fmt4(report.aggregate) << "  (" << report.aggregate_matched << "/"
        << report.aggregate_total << ")\n";
}

void print_precision(std::ostream& out, const PrecisionReport& report) {
    out << "toy mentions: " << fmt2(report.mean_count) << " per image over " << report.images
        << " images; precision ";
    if (report.pooled_precision.has_value()) {
        out << fmt4(*report.pooled_precision) << " (" << report.correct_total << "/"
            << report.predicted_total << ")\n";
    } else {
        out << "absent (no toys predicted)\n";
    }
}

// Headline numbers from the full-scale study this laboratory miniaturizes.
// Published reference values, not reproduced at this scale.
void print_published_refs(std::ostream& out) {
    out << "published reference values (full-scale study; not reproduced at this scale):\n"
        << "  overall TTS: baseline 38.07, +sft 42.42, +sft+grpo 49.61, +sft+rsrs 51.07\n"
        << "  cells grpo -> rsrs: FL 65.66 -> 66.59, FM 14.39 -> 17.18, FH 0.02 -> 0.09,\n"
        << "                      BL 37.97 -> 39.69, BM 2.86 -> 3.87, BH 0.02 -> 0.03\n"
        << "  toys/image and precision: +sft 1.66/69.59, +grpo 1.84/64.43, +rsrs 2.08/56.43\n"
        << "  metric vs human ranking: tau 0.67, rho 0.72\n";
}

void print_experiment(std::ostream& out, const ExperimentReport& report) {
    out << "samples: " << report.n_samples << " (train " << report.n_train << ", eval "
        << report.n_eval << ", eval hard " << report.n_eval_hard << "), corpus hash "
        << report.corpus_hash << "\n";
    out << "branches:";
    for (const auto& [name, count] : report.branch_counts) out << " " << name << "=" << count;
    out << "\n";
    out << "buffer: enqueued=" << report.buffer_enqueued << " dequeued=" << report.buffer_dequeued
        << " final=" << report.buffer_final << " high_water=" << report.buffer_high_water << "\n";
    out << "holdout nll: " << fmt4(report.initial_holdout_nll) << " -> "
        << fmt4(report.final_holdout_nll) << "\n";
    print_tts(out, report.tts_overall, "TTS, all eval samples");
    if (report.tts_easy.has_value()) {
        out << "easy slice aggregate: " << fmt4(report.tts_easy->aggregate) << " ("
            << report.tts_easy->aggregate_matched << "/" << report.tts_easy->aggregate_total
            << ")\n";
    }
    if (report.tts_hard.has_value()) {
        const CellStats& fh = report.tts_hard->cell(ToyRole::Foreground, PrecisionLevel::High);
        out << "hard slice aggregate: " << fmt4(report.tts_hard->aggregate) << " ("
            << report.tts_hard->aggregate_matched << "/" << report.tts_hard->aggregate_total
            << "), TTS-FH ";
        if (fh.rate.has_value()) {
            out << fmt4(*fh.rate) << " (" << fh.matched << "/" << fh.total << ")\n";
        } else {
            out << "absent\n";
        }
    }
    print_precision(out, report.precision);
}

void print_correlation(std::ostream& out, const CorrelationReport& report) {
    const std::size_t shown = std::min<std::size_t>(report.rows.size(), 20);
    out << "image_id        tau      rho\n";
    for (std::size_t i = 0; i < shown; ++i) {
        const CorrelationRow& row = report.rows[i];
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%-12s %8.4f %8.4f\n", row.image_id.c_str(), row.tau,
                      row.rho);
        out << buf;
    }
    if (report.rows.size() > shown) {
        out << "... (" << report.rows.size() - shown << " more images)\n";
    }
    out << "mean over " << report.rows.size() << " images: tau " << fmt4(report.mean_tau)
        << ", rho " << fmt4(report.mean_rho) << "\n";
}

void echo_config(std::ostream& out, CLI::App* sub) {
    out << "# effective " << sub->get_name() << " config\n" << sub->config_to_str(true, false);
}

std::string trim_ws(const std::string& s) {
    std::size_t begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    std::size_t end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

// Flat key=value lines; '#' comments and blank lines ignored; values may be
// double-quoted, so the echoed effective config is itself a valid file.
std::vector<std::pair<std::string, std::string>> read_flat_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open config file \"" + path + "\"");
    std::vector<std::pair<std::string, std::string>> items;
    std::set<std::string> seen;
    std::string line;
    long long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string where = path + " line " + std::to_string(line_no);
        std::string trimmed = trim_ws(line);
        if (trimmed.empty() || trimmed[0] == '#') continue;
        const std::size_t eq = trimmed.find('=');
        if (eq == std::string::npos) throw DataError(where + ": expected key=value");
        std::string key = trim_ws(trimmed.substr(0, eq));
        std::string value = trim_ws(trimmed.substr(eq + 1));
        if (key.empty()) throw DataError(where + ": empty key");
        if (key == "config") throw ValidationError(where + ": config files cannot nest");
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
            value = value.substr(1, value.size() - 2);
        }
        if (!seen.insert(key).second) {
            throw ValidationError(path + ": duplicate key \"" + key + "\"");
        }
        items.emplace_back(std::move(key), std::move(value));
    }
    return items;
}

struct GenOptions {
    CorpusConfig corpus;
    std::string out_path;
};

int cmd_gen(const GenOptions& opt, std::ostream& out) {
    Dataset dataset = generate_corpus(opt.corpus);
    write_dataset(dataset, opt.out_path);
    out << "wrote " << opt.out_path << ": " << dataset.samples.size() << " samples, "
        << opt.corpus.n_toys << " toys, vocab " << dataset.header.vocab.size() << ", corpus hash "
        << corpus_hash(dataset) << "\n";
    return 0;
}

struct TrainOptions {
    TrainerConfig trainer;
    std::string data_path;
    std::string out_dir;
    std::string init_checkpoint;
    bool with_published_refs = false;
};

int cmd_train(const TrainOptions& opt, std::ostream& out) {
    Dataset dataset = read_dataset(opt.data_path);
    if (dataset.samples.empty()) {
        throw DataError("dataset \"" + opt.data_path + "\" contains no samples");
    }
    std::optional<Checkpoint> init;
    if (!opt.init_checkpoint.empty()) init = load_checkpoint(opt.init_checkpoint);

    std::filesystem::create_directories(opt.out_dir);
    RunLock lock(opt.out_dir);
    ExperimentOutput result =
        run_experiment(opt.trainer, dataset, opt.out_dir, init ? &*init : nullptr);

    print_experiment(out, result.report);
    if (opt.with_published_refs) print_published_refs(out);
    out << "wrote " << opt.out_dir
        << "/{telemetry.jsonl, report.json, plot.csv, checkpoint.json}\n";
    return 0;
}

struct EvalOptions {
    std::string data_path;
    std::string candidates_path;
    std::string pooling = "pooled";
    RewardConfig reward;
    std::string credit = "highest";
    bool mean_reward = false;
    bool with_published_refs = false;
    std::string json_out;
};

int cmd_eval(const EvalOptions& opt, std::ostream& out) {
    RewardConfig reward_cfg = opt.reward;
    reward_cfg.credit = level_credit_from_string(opt.credit);
    validate(reward_cfg);
    const TtsPooling pooling = tts_pooling_from_string(opt.pooling);

    Dataset dataset = read_dataset(opt.data_path);
    std::vector<std::vector<Phrase>> candidates = read_candidates(opt.candidates_path, dataset);

    TtsReport tts_report = tts(dataset.samples, candidates, pooling);
    PrecisionReport precision =
        precision_report(dataset.samples, candidates, toy_inventory(dataset));
    print_tts(out, tts_report, "TTS");
    print_precision(out, precision);

    std::optional<double> mean_reward;
    if (opt.mean_reward) {
        double total = 0.0;
        long long count = 0;
        for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
            for (const Phrase& caption : candidates[i]) {
                total += reward(caption, dataset.samples[i].toys, reward_cfg);
                ++count;
            }
        }
        if (count == 0) throw ValidationError("no candidates to score a mean reward over");
        mean_reward = total / static_cast<double>(count);
        out << "mean caption reward: " << fmt4(*mean_reward) << " over " << count
            << " candidates\n";
    }
    if (opt.with_published_refs) print_published_refs(out);

    if (!opt.json_out.empty()) {
        json j{{"schema_version", 1},
               {"data", opt.data_path},
               {"candidates", opt.candidates_path},
               {"reward", reward_cfg},
               {"tts", tts_report},
               {"precision", precision}};
        if (mean_reward.has_value()) j["mean_reward"] = *mean_reward;
        write_file(opt.json_out, j.dump(2) + "\n");
        out << "wrote " << opt.json_out << "\n";
    }
    return 0;
}

struct RankCorrOptions {
    std::string a_path;
    std::string b_path;
    bool study = false;
    RankStudyConfig study_cfg;
    std::string json_out;
};

int cmd_rank_corr(const RankCorrOptions& opt, std::ostream& out) {
    json j;
    if (opt.study) {
        RankStudyReport report = planted_quality_study(opt.study_cfg);
        out << "planted-quality study: " << opt.study_cfg.images << " images, "
            << opt.study_cfg.captions_per_image << " captions each, noise "
            << fmt2(opt.study_cfg.noise) << " (" << report.noisy_images << " images perturbed)\n";
        print_correlation(out, report.correlation);
        j = report;
    } else {
        if (opt.a_path.empty() || opt.b_path.empty()) {
            throw ValidationError("rank-corr needs either --study or both --a and --b");
        }
        CorrelationReport report = correlate_rankings(read_rankings(opt.a_path),
                                                      read_rankings(opt.b_path));
        print_correlation(out, report);
        j = json{{"schema_version", 1},
                 {"a", opt.a_path},
                 {"b", opt.b_path},
                 {"correlation", report}};
    }
    if (!opt.json_out.empty()) {
        write_file(opt.json_out, j.dump(2) + "\n");
        out << "wrote " << opt.json_out << "\n";
    }
    return 0;
}

struct ReportOptions {
    std::string run_dir;
    std::string plot_out;
    bool with_published_refs = false;
};

int cmd_report(const ReportOptions& opt, std::ostream& out) {
    const std::filesystem::path dir(opt.run_dir);
    ExperimentReport report = parse_report(slurp((dir / "report.json").string()));
    print_experiment(out, report);
    if (opt.with_published_refs) print_published_refs(out);
    if (!opt.plot_out.empty()) {
        TelemetryFile telemetry = parse_telemetry(slurp((dir / "telemetry.jsonl").string()));
        write_file(opt.plot_out, serialize_plot_csv(telemetry.records));
        out << "wrote " << opt.plot_out << " (" << telemetry.records.size() << " steps)\n";
    }
    return 0;
}

}  // namespace

std::vector<std::vector<Phrase>> read_candidates(const std::string& path, const Dataset& dataset) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open \"" + path + "\"");

    std::map<std::string, std::size_t> index_by_id;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        index_by_id[dataset.samples[i].sample_id] = i;
    }

    std::vector<std::vector<Phrase>> result(dataset.samples.size());
    std::vector<bool> seen(dataset.samples.size(), false);
    std::set<std::string> unknown;

    std::string line;
    long long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = path + " line " + std::to_string(line_no);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError(where + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("sample_id") || !j.contains("candidates")) {
            throw DataError(where + ": expected {\"sample_id\", \"candidates\"}");
        }
        if (!j.at("sample_id").is_string() || !j.at("candidates").is_array()) {
            throw DataError(where + ": sample_id must be a string and candidates an array");
        }
        const std::string sample_id = j.at("sample_id").get<std::string>();
        auto it = index_by_id.find(sample_id);
        if (it == index_by_id.end()) {
            unknown.insert(sample_id);
            continue;
        }
        if (seen[it->second]) {
            throw DataError(where + ": duplicate candidates for sample \"" + sample_id + "\"");
        }
        seen[it->second] = true;
        for (const auto& c : j.at("candidates")) {
            result[it->second].push_back(phrase_from_json(c, where));
        }
    }

    if (!unknown.empty()) {
        std::string ids;
        int shown = 0;
        for (const std::string& id : unknown) {
            if (shown == 10) {
                ids += ", ...";
                break;
            }
            if (shown > 0) ids += ", ";
            ids += "\"" + id + "\"";
            ++shown;
        }
        throw DataError("candidates file \"" + path + "\" references " +
                        std::to_string(unknown.size()) + " sample id(s) not in the dataset: " +
                        ids);
    }
    return result;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"desk-scale laboratory for reward-conditional hybrid caption training"};
    app.name("caplab");
    app.require_subcommand(1);

    auto add_reward_options = [](CLI::App* sub, RewardConfig& reward, std::string& credit) {
        sub->add_option("--w-foreground", reward.w_foreground, "foreground toy weight")
            ->capture_default_str();
        sub->add_option("--w-background", reward.w_background, "background toy weight")
            ->capture_default_str();
        sub->add_option("--score-low", reward.level_score[0], "low precision level score")
            ->capture_default_str();
        sub->add_option("--score-medium", reward.level_score[1], "medium precision level score")
            ->capture_default_str();
        sub->add_option("--score-high", reward.level_score[2], "high precision level score")
            ->capture_default_str();
        sub->add_option("--credit", credit, "level credit: highest|per_level")
            ->capture_default_str();
    };

    GenOptions gen_opt;
    CLI::App* gen = app.add_subcommand("gen", "generate a synthetic captioning dataset");
    gen->add_option("--config", "flat key=value config file; explicit flags win");
    gen->add_option("--out", gen_opt.out_path, "output dataset path (JSONL)")->required();
    gen->add_option("--seed", gen_opt.corpus.seed, "rng seed")->capture_default_str();
    gen->add_option("--n", gen_opt.corpus.n_samples, "number of samples")->capture_default_str();
    gen->add_option("--n-toys", gen_opt.corpus.n_toys, "toy inventory size")
        ->capture_default_str();
    gen->add_option("--hard-fraction", gen_opt.corpus.hard_fraction,
                    "fraction of samples drawn from the hard toy pool")
        ->capture_default_str();
    gen->add_option("--vocab-size", gen_opt.corpus.vocab_size, "token vocabulary size")
        ->capture_default_str();
    gen->add_option("--feature-dim", gen_opt.corpus.feature_dim, "feature vector length")
        ->capture_default_str();
    gen->add_option("--caption-length", gen_opt.corpus.caption_length, "caption token budget")
        ->capture_default_str();
    gen->add_option("--toys-min", gen_opt.corpus.toys_per_sample_min, "min toys per sample")
        ->capture_default_str();
    gen->add_option("--toys-max", gen_opt.corpus.toys_per_sample_max, "max toys per sample")
        ->capture_default_str();
    gen->add_option("--noise-sigma", gen_opt.corpus.noise_sigma, "feature noise stddev")
        ->capture_default_str();
    gen->add_option("--hard-signal-scale", gen_opt.corpus.hard_signal_scale,
                    "feature magnitude of hard-pool toys")
        ->capture_default_str();
    gen->add_option("--bg-mention-rate", gen_opt.corpus.background_mention_rate,
                    "chance a background toy appears in the ground truth")
        ->capture_default_str();

    TrainOptions train_opt;
    std::string train_mode = "rsrs";
    std::string train_buffer = "fifo";
    std::string train_split = "shared";
    std::string train_pooling = "pooled";
    std::string train_credit = "highest";
    CLI::App* train = app.add_subcommand("train", "train a policy and evaluate it");
    train->add_option("--config", "flat key=value config file; explicit flags win");
    train->add_option("--data", train_opt.data_path, "dataset path (JSONL)")->required();
    train->add_option("--out-dir", train_opt.out_dir, "run output directory")->required();
    train->add_option("--mode", train_mode, "training mode: sft|grpo|rsrs")
        ->capture_default_str();
    train->add_option("--warmup-steps", train_opt.trainer.warmup_steps, "supervised warm-up steps")
        ->capture_default_str();
    train->add_option("--hybrid-steps", train_opt.trainer.hybrid_steps,
                      "steps after warm-up (grpo and rsrs modes)")
        ->capture_default_str();
    train->add_option("--group-size", train_opt.trainer.group_size, "rollouts per group")
        ->capture_default_str();
    train->add_option("--batch-size", train_opt.trainer.batch_size,
                      "buffer threshold and supervised mini-batch size")
        ->capture_default_str();
    train->add_option("--eps", train_opt.trainer.eps, "surrogate clip range")
        ->capture_default_str();
    train->add_option("--lr-sft", train_opt.trainer.lr_sft, "supervised learning rate")
        ->capture_default_str();
    train->add_option("--lr-grpo", train_opt.trainer.lr_grpo, "policy-gradient learning rate")
        ->capture_default_str();
    train->add_option("--inner-steps", train_opt.trainer.inner_steps,
                      "surrogate updates per group against fixed old log-probs")
        ->capture_default_str();
    train->add_option("--seed", train_opt.trainer.seed, "rng seed")->capture_default_str();
    train->add_option("--buffer-policy", train_buffer, "zero-reward buffer order: fifo|random")
        ->capture_default_str();
    train->add_option("--hybrid-split", train_split,
                      "warm-up vs hybrid data: shared|disjoint")
        ->capture_default_str();
    train->add_option("--eval-fraction", train_opt.trainer.eval_fraction, "held-out fraction")
        ->capture_default_str();
    train->add_option("--eval-candidates", train_opt.trainer.eval_candidates,
                      "candidates per eval sample when sampling")
        ->capture_default_str();
    train->add_flag("--eval-sample", train_opt.trainer.eval_sample,
                    "sample eval candidates instead of greedy decoding");
    train->add_option("--pooling", train_pooling, "TTS pooling: pooled|per_image_mean")
        ->capture_default_str();
    add_reward_options(train, train_opt.trainer.reward, train_credit);
    train->add_option("--init-checkpoint", train_opt.init_checkpoint,
                      "checkpoint to resume from (corpus hash must match)")
        ->capture_default_str();
    train->add_flag("--with-published-refs", train_opt.with_published_refs,
                    "append published full-scale reference values to the summary");

    EvalOptions eval_opt;
    CLI::App* eval = app.add_subcommand("eval", "score candidate captions against a dataset");
    eval->add_option("--config", "flat key=value config file; explicit flags win");
    eval->add_option("--data", eval_opt.data_path, "dataset path (JSONL)")->required();
    eval->add_option("--candidates", eval_opt.candidates_path,
                     "candidates path (JSONL, {\"sample_id\", \"candidates\"})")
        ->required();
    eval->add_option("--pooling", eval_opt.pooling, "TTS pooling: pooled|per_image_mean")
        ->capture_default_str();
    add_reward_options(eval, eval_opt.reward, eval_opt.credit);
    eval->add_flag("--reward", eval_opt.mean_reward, "also report the mean caption reward");
    eval->add_flag("--with-published-refs", eval_opt.with_published_refs,
                   "append published full-scale reference values");
    eval->add_option("--json-out", eval_opt.json_out, "write the reports as JSON here")
        ->capture_default_str();

    RankCorrOptions rank_opt;
    std::string rank_credit = "highest";
    CLI::App* rank = app.add_subcommand(
        "rank-corr", "rank correlation between two ranking files, or a planted-quality study");
    rank->add_option("--config", "flat key=value config file; explicit flags win");
    rank->add_option("--a", rank_opt.a_path, "first ranking file (JSONL)")->capture_default_str();
    rank->add_option("--b", rank_opt.b_path, "second ranking file (JSONL)")
        ->capture_default_str();
    rank->add_flag("--study", rank_opt.study,
                   "run the planted-quality study instead of comparing files");
    rank->add_option("--images", rank_opt.study_cfg.images, "study: number of images")
        ->capture_default_str();
    rank->add_option("--captions", rank_opt.study_cfg.captions_per_image,
                     "study: captions per image")
        ->capture_default_str();
    rank->add_option("--noise", rank_opt.study_cfg.noise,
                     "study: chance of one adjacent swap per planted ranking")
        ->capture_default_str();
    rank->add_option("--seed", rank_opt.study_cfg.seed, "study: rng seed")->capture_default_str();
    add_reward_options(rank, rank_opt.study_cfg.reward, rank_credit);
    rank->add_option("--json-out", rank_opt.json_out, "write the report as JSON here")
        ->capture_default_str();

    ReportOptions report_opt;
    CLI::App* report = app.add_subcommand("report", "summarize a finished run directory");
    report->add_option("--config", "flat key=value config file; explicit flags win");
    report->add_option("--run-dir", report_opt.run_dir, "directory written by train")->required();
    report->add_option("--plot", report_opt.plot_out,
                       "regenerate the per-step CSV from telemetry.jsonl to this path")
        ->capture_default_str();
    report->add_flag("--with-published-refs", report_opt.with_published_refs,
                     "append published full-scale reference values");

    try {
        std::vector<std::string> argv = args;
        // Merge a config file's keys as extra trailing flags; keys already
        // given explicitly stay as typed, so the command line wins.
        std::string config_path;
        for (std::size_t i = 0; i < argv.size(); ++i) {
            if (argv[i] == "--config" && i + 1 < argv.size()) config_path = argv[i + 1];
            if (argv[i].rfind("--config=", 0) == 0) config_path = argv[i].substr(9);
        }
        CLI::App* target = argv.empty() ? nullptr : app.get_subcommand_no_throw(argv[0]);
        if (!config_path.empty() && target != nullptr) {
            auto given = [&argv](const std::string& key) {
                const std::string flag = "--" + key;
                for (const std::string& a : argv) {
                    if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
                }
                return false;
            };
            for (const auto& [key, value] : read_flat_config(config_path)) {
                if (target->get_option_no_throw("--" + key) == nullptr) {
                    throw ValidationError("config file \"" + config_path +
                                          "\": unknown key \"" + key + "\" for subcommand " +
                                          target->get_name());
                }
                if (!given(key)) argv.push_back("--" + key + "=" + value);
            }
        }
        std::vector<std::string> reversed(argv.rbegin(), argv.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (gen->parsed()) {
            echo_config(out, gen);
            return cmd_gen(gen_opt, out);
        }
        if (train->parsed()) {
            train_opt.trainer.mode = train_mode_from_string(train_mode);
            train_opt.trainer.buffer_policy = buffer_policy_from_string(train_buffer);
            train_opt.trainer.hybrid_split = hybrid_split_from_string(train_split);
            train_opt.trainer.pooling = tts_pooling_from_string(train_pooling);
            train_opt.trainer.reward.credit = level_credit_from_string(train_credit);
            echo_config(out, train);
            return cmd_train(train_opt, out);
        }
        if (eval->parsed()) {
            echo_config(out, eval);
            return cmd_eval(eval_opt, out);
        }
        if (rank->parsed()) {
            rank_opt.study_cfg.reward.credit = level_credit_from_string(rank_credit);
            echo_config(out, rank);
            return cmd_rank_corr(rank_opt, out);
        }
        if (report->parsed()) {
            echo_config(out, report);
            return cmd_report(report_opt, out);
        }
        err << "error: no subcommand\n";
        return 1;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const InternalError& e) {
        err << "internal error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace caplab
