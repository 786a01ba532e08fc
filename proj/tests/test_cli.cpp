#include <doctest.h>

#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "caplab/cli.hpp"
#include "caplab/corpus.hpp"
#include "caplab/policy.hpp"
#include "caplab/rankstudy.hpp"
#include "caplab/training.hpp"
#include "helpers.hpp"

using namespace caplab;
using namespace caplab::testing;

namespace {

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

CliResult run(const std::vector<std::string>& args) {
    std::ostringstream out;
    std::ostringstream err;
    CliResult result;
    result.code = run_cli(args, out, err);
    result.out = out.str();
    result.err = err.str();
    return result;
}

bool contains(const std::string& haystack, const std::string& needle) {
    return haystack.find(needle) != std::string::npos;
}

std::string gen_tiny(const TempDir& dir, const std::string& name, int n, std::uint64_t seed) {
    const std::string path = dir.file(name);
    const CliResult r = run({"gen", "--out", path, "--n", std::to_string(n), "--vocab-size", "32",
                             "--feature-dim", "8", "--n-toys", "8", "--seed",
                             std::to_string(seed)});
    REQUIRE(r.code == 0);
    return path;
}

// One candidate per sample naming every populated level of every toy, the
// best caption the metric can reward.
std::string oracle_candidates(const TempDir& dir, const std::string& name,
                              const Dataset& dataset) {
    std::string body;
    for (const Sample& sample : dataset.samples) {
        TokenSeq caption;
        for (const ToyAnnotation& toy : sample.toys) {
            for (PrecisionLevel level : kAllLevels) {
                if (!toy.has_level(level)) continue;
                const TokenSeq& tokens = std::get<TokenSeq>(toy.names_at(level).front());
                caption.insert(caption.end(), tokens.begin(), tokens.end());
            }
        }
        nlohmann::json line{{"sample_id", sample.sample_id},
                            {"candidates", nlohmann::json::array({caption})}};
        body += line.dump() + "\n";
    }
    const std::string path = dir.file(name);
    write_text(path, body);
    return path;
}

}  // namespace

TEST_CASE("gen writes a deterministic dataset and echoes its config") {
    TempDir dir;
    const std::string a = gen_tiny(dir, "a.jsonl", 40, 11);
    const std::string b = gen_tiny(dir, "b.jsonl", 40, 11);
    CHECK(read_text(a) == read_text(b));
    CHECK(read_dataset(a).samples.size() == 40);

    const CliResult r = run({"gen", "--out", dir.file("c.jsonl"), "--n", "5", "--seed", "1"});
    CHECK(r.code == 0);
    CHECK(contains(r.out, "# effective gen config"));
    CHECK(contains(r.out, "seed=1"));
    CHECK(contains(r.out, "corpus hash"));
}

TEST_CASE("gen reports usage and validation failures") {
    TempDir dir;
    CHECK(run({"gen"}).code == 1);

    const CliResult bad = run({"gen", "--out", dir.file("d.jsonl"), "--hard-fraction", "1.5"});
    CHECK(bad.code == 1);
    CHECK(contains(bad.err, "hard_fraction"));

    CHECK(run({"gen", "--out", dir.file("d.jsonl"), "--no-such-flag"}).code == 1);
    CHECK(run({}).code == 1);
}

TEST_CASE("config files fill in flags the command line omits") {
    TempDir dir;
    const std::string cfg = dir.file("gen.cfg");
    write_text(cfg, "# tiny corpus\nn = 25\nseed = 4\nvocab-size = 32\nfeature-dim = 8\nn-toys = 8\n");

    const std::string data = dir.file("data.jsonl");
    REQUIRE(run({"gen", "--config", cfg, "--out", data}).code == 0);
    CHECK(read_dataset(data).samples.size() == 25);

    REQUIRE(run({"gen", "--config", cfg, "--out", data, "--n", "30"}).code == 0);
    CHECK(read_dataset(data).samples.size() == 30);

    write_text(cfg, "warmup-steps = 5\n");
    const CliResult unknown = run({"gen", "--config", cfg, "--out", data});
    CHECK(unknown.code == 1);
    CHECK(contains(unknown.err, "unknown key \"warmup-steps\""));

    write_text(cfg, "n = 5\nn = 6\n");
    const CliResult dup = run({"gen", "--config", cfg, "--out", data});
    CHECK(dup.code == 1);
    CHECK(contains(dup.err, "duplicate key"));

    write_text(cfg, "config = other.cfg\n");
    CHECK(run({"gen", "--config", cfg, "--out", data}).code == 1);

    write_text(cfg, "just some words\n");
    CHECK(run({"gen", "--config", cfg, "--out", data}).code == 2);

    CHECK(run({"gen", "--config", dir.file("missing.cfg"), "--out", data}).code == 2);
}

TEST_CASE("train runs are byte-reproducible end to end") {
    TempDir dir;
    const std::string data = gen_tiny(dir, "data.jsonl", 40, 9);
    const std::vector<std::string> common = {
        "train",        "--data", data, "--mode",          "rsrs", "--warmup-steps", "20",
        "--hybrid-steps", "30",   "--group-size", "4",     "--batch-size", "2",
        "--seed",       "9",      "--eval-fraction", "0.25"};

    auto with_dir = [&common](const std::string& out_dir) {
        std::vector<std::string> args = common;
        args.push_back("--out-dir");
        args.push_back(out_dir);
        return args;
    };

    const CliResult first = run(with_dir(dir.file("run1")));
    REQUIRE(first.code == 0);
    CHECK(contains(first.out, "branches:"));
    CHECK(contains(first.out, "holdout nll"));
    CHECK(contains(first.out, "TTS, all eval samples"));

    const CliResult second = run(with_dir(dir.file("run2")));
    REQUIRE(second.code == 0);

    for (const char* name : {"report.json", "telemetry.jsonl", "checkpoint.json", "plot.csv"}) {
        CHECK(read_text(dir.file("run1/") + name) == read_text(dir.file("run2/") + name));
    }
}

TEST_CASE("train surfaces usage and data errors with distinct exit codes") {
    TempDir dir;
    const std::string data = gen_tiny(dir, "data.jsonl", 10, 2);

    const CliResult mode = run({"train", "--data", data, "--out-dir", dir.file("r"), "--mode",
                                "sgd"});
    CHECK(mode.code == 1);
    CHECK(contains(mode.err, "unknown mode \"sgd\""));

    const std::string empty = dir.file("empty.jsonl");
    write_text(empty, "");
    CHECK(run({"train", "--data", empty, "--out-dir", dir.file("r")}).code == 2);

    CHECK(run({"train", "--data", dir.file("nope.jsonl"), "--out-dir", dir.file("r")}).code == 2);

    const std::string locked = dir.file("locked");
    std::filesystem::create_directories(locked);
    write_text(locked + "/.lock", "");
    const CliResult lock = run({"train", "--data", data, "--out-dir", locked, "--warmup-steps",
                                "1", "--hybrid-steps", "1"});
    CHECK(lock.code == 1);
    CHECK(contains(lock.err, "run lock"));
}

TEST_CASE("a zero-reward checkpoint drives the buffered branch through the command line") {
    TempDir dir;
    const std::string data = gen_tiny(dir, "data.jsonl", 24, 5);
    const Dataset dataset = read_dataset(data);

    PolicyModel model = PolicyModel::for_dataset(dataset.header);
    model.b[kFillerToken] = 25.0;
    const std::string ckpt = dir.file("init.json");
    save_checkpoint(model, corpus_hash(dataset), ckpt);

    const std::string out_dir = dir.file("run");
    const CliResult r = run({"train", "--data", data, "--out-dir", out_dir, "--mode", "rsrs",
                             "--warmup-steps", "0", "--hybrid-steps", "12", "--group-size", "4",
                             "--batch-size", "3", "--seed", "9", "--init-checkpoint", ckpt});
    REQUIRE(r.code == 0);
    CHECK(contains(r.out, "sft_from_buffer="));

    const ExperimentReport report = parse_report(read_text(out_dir + "/report.json"));
    CHECK(report.branch_counts.at("grpo") == 9);
    CHECK(report.branch_counts.at("sft_from_buffer") == 3);
    CHECK(report.buffer_enqueued == 9);
    CHECK(report.buffer_dequeued == 9);
    CHECK(report.buffer_final == 0);

    save_checkpoint(model, "deadbeef", ckpt);
    const CliResult mismatch = run({"train", "--data", data, "--out-dir", dir.file("run2"),
                                    "--init-checkpoint", ckpt});
    CHECK(mismatch.code == 2);
    CHECK(contains(mismatch.err, "does not match"));
}

TEST_CASE("eval scores ground-truth candidates perfectly") {
    TempDir dir;
    const std::string data = gen_tiny(dir, "data.jsonl", 20, 3);
    const Dataset dataset = read_dataset(data);
    const std::string cands = oracle_candidates(dir, "cands.jsonl", dataset);

    const std::string json_out = dir.file("eval.json");
    const CliResult r = run({"eval", "--data", data, "--candidates", cands, "--reward",
                             "--json-out", json_out});
    REQUIRE(r.code == 0);
    CHECK(contains(r.out, "aggregate  1.0000"));
    CHECK(contains(r.out, "precision 1.0000"));
    CHECK(contains(r.out, "mean caption reward"));

    const nlohmann::json j = nlohmann::json::parse(read_text(json_out));
    CHECK(j.at("tts").at("aggregate").get<double>() == 1.0);
    CHECK(j.at("precision").at("pooled_precision").get<double>() == 1.0);
    CHECK(j.at("mean_reward").get<double>() > 0.0);
}

TEST_CASE("eval rejects candidate files that do not align with the dataset") {
    TempDir dir;
    const std::string data = gen_tiny(dir, "data.jsonl", 5, 3);
    const std::string cands = dir.file("cands.jsonl");

    write_text(cands, "{\"sample_id\": \"ghost\", \"candidates\": [[1]]}\n");
    const CliResult unknown = run({"eval", "--data", data, "--candidates", cands});
    CHECK(unknown.code == 2);
    CHECK(contains(unknown.err, "ghost"));
    CHECK(contains(unknown.err, "not in the dataset"));

    const Dataset dataset = read_dataset(data);
    const std::string line = "{\"sample_id\": \"" + dataset.samples[0].sample_id +
                             "\", \"candidates\": [[1]]}\n";
    write_text(cands, line + line);
    const CliResult dup = run({"eval", "--data", data, "--candidates", cands});
    CHECK(dup.code == 2);
    CHECK(contains(dup.err, "duplicate candidates"));

    write_text(cands, "{\"sample_id\": \"" + dataset.samples[0].sample_id +
                          "\", \"candidates\": [[1.5]]}\n");
    CHECK(run({"eval", "--data", data, "--candidates", cands}).code == 2);

    write_text(cands, "{\"sample_id\": \"" + dataset.samples[0].sample_id +
                          "\", \"candidates\": [{}]}\n");
    CHECK(run({"eval", "--data", data, "--candidates", cands}).code == 2);

    CHECK(run({"eval", "--data", data, "--candidates", dir.file("nope.jsonl")}).code == 2);
}

TEST_CASE("eval of an empty candidates file reports zero rates") {
    TempDir dir;
    const std::string data = gen_tiny(dir, "data.jsonl", 10, 4);
    const std::string cands = dir.file("cands.jsonl");
    write_text(cands, "");

    const CliResult r = run({"eval", "--data", data, "--candidates", cands});
    REQUIRE(r.code == 0);
    CHECK(contains(r.out, "aggregate  0.0000"));
    CHECK(contains(r.out, "absent (no toys predicted)"));

    const CliResult no_reward = run({"eval", "--data", data, "--candidates", cands, "--reward"});
    CHECK(no_reward.code == 1);
    CHECK(contains(no_reward.err, "no candidates"));
}

TEST_CASE("published reference values print only on request") {
    TempDir dir;
    const std::string data = gen_tiny(dir, "data.jsonl", 5, 3);
    const Dataset dataset = read_dataset(data);
    const std::string cands = oracle_candidates(dir, "cands.jsonl", dataset);

    const CliResult plain = run({"eval", "--data", data, "--candidates", cands});
    REQUIRE(plain.code == 0);
    CHECK(!contains(plain.out, "not reproduced"));

    const CliResult refs = run({"eval", "--data", data, "--candidates", cands,
                                "--with-published-refs"});
    REQUIRE(refs.code == 0);
    CHECK(contains(refs.out, "not reproduced at this scale"));
    CHECK(contains(refs.out, "tau 0.67"));
}

TEST_CASE("rank-corr compares ranking files and runs the planted study") {
    TempDir dir;
    RankingFile file;
    file.images.push_back({"img0", {"a", "b", "c"}});
    file.images.push_back({"img1", {"c", "a", "b"}});
    const std::string path = dir.file("ranks.jsonl");
    write_text(path, serialize_rankings(file));

    const std::string json_out = dir.file("corr.json");
    const CliResult self = run({"rank-corr", "--a", path, "--b", path, "--json-out", json_out});
    REQUIRE(self.code == 0);
    CHECK(contains(self.out, "mean over 2 images: tau 1.0000, rho 1.0000"));
    const nlohmann::json j = nlohmann::json::parse(read_text(json_out));
    CHECK(j.at("correlation").at("mean_tau").get<double>() == 1.0);

    const CliResult half = run({"rank-corr", "--a", path});
    CHECK(half.code == 1);
    CHECK(contains(half.err, "needs either --study or both"));

    const CliResult study = run({"rank-corr", "--study", "--images", "8", "--noise", "0",
                                 "--seed", "3"});
    REQUIRE(study.code == 0);
    CHECK(contains(study.out, "0 images perturbed"));
    CHECK(contains(study.out, "mean over 8 images: tau 1.0000, rho 1.0000"));

    CHECK(run({"rank-corr", "--study", "--noise", "2"}).code == 1);
}

TEST_CASE("report replays a finished run directory") {
    TempDir dir;
    const std::string data = gen_tiny(dir, "data.jsonl", 20, 6);
    const std::string out_dir = dir.file("run");
    REQUIRE(run({"train", "--data", data, "--out-dir", out_dir, "--mode", "sft",
                 "--warmup-steps", "10", "--seed", "2"})
                .code == 0);

    const std::string plot = dir.file("replay.csv");
    const CliResult r = run({"report", "--run-dir", out_dir, "--plot", plot});
    REQUIRE(r.code == 0);
    CHECK(contains(r.out, "samples: 20"));
    CHECK(contains(r.out, "wrote " + plot));
    CHECK(contains(read_text(plot), "step,branch,mean_group_reward,buffer_size,grad_norm"));
    CHECK(read_text(plot) == read_text(out_dir + "/plot.csv"));

    CHECK(run({"report", "--run-dir", dir.file("nothing")}).code == 2);
}
