#include "caplab/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "caplab/rng.hpp"

namespace caplab {

using nlohmann::json;

namespace {

// Stream tag for the toy-direction rng; per-sample streams use seed ^ index,
// and sample indices can never reach this value.
constexpr std::uint64_t kToyDirectionTag = 0xd1b54a32d192ed03ULL;

std::string pad_id(const char* prefix, int value, int width) {
    std::string digits = std::to_string(value);
    if (digits.size() < static_cast<std::size_t>(width)) {
        digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
    }
    return prefix + digits;
}

bool contains_tokens(const TokenSeq& hay, const TokenSeq& needle) {
    if (needle.empty() || needle.size() > hay.size()) return false;
    for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
        if (std::equal(needle.begin(), needle.end(), hay.begin() + i)) return true;
    }
    return false;
}

}  // namespace

std::string to_string(PrecisionLevel level) {
    switch (level) {
        case PrecisionLevel::Low: return "low";
        case PrecisionLevel::Medium: return "medium";
        case PrecisionLevel::High: return "high";
    }
    throw InternalError("invalid PrecisionLevel value");
}

std::string to_string(ToyRole role) {
    switch (role) {
        case ToyRole::Foreground: return "foreground";
        case ToyRole::Background: return "background";
    }
    throw InternalError("invalid ToyRole value");
}

std::string to_string(Hardness hardness) {
    switch (hardness) {
        case Hardness::Easy: return "easy";
        case Hardness::Hard: return "hard";
    }
    throw InternalError("invalid Hardness value");
}

PrecisionLevel precision_level_from_string(const std::string& s) {
    if (s == "low") return PrecisionLevel::Low;
    if (s == "medium") return PrecisionLevel::Medium;
    if (s == "high") return PrecisionLevel::High;
    throw DataError("unknown precision level \"" + s + "\"");
}

ToyRole toy_role_from_string(const std::string& s) {
    if (s == "foreground") return ToyRole::Foreground;
    if (s == "background") return ToyRole::Background;
    throw DataError("unknown toy role \"" + s + "\"");
}

Hardness hardness_from_string(const std::string& s) {
    if (s == "easy") return Hardness::Easy;
    if (s == "hard") return Hardness::Hard;
    throw DataError("unknown hardness \"" + s + "\"");
}

std::optional<PrecisionLevel> ToyAnnotation::highest_populated() const {
    for (int i = 2; i >= 0; --i) {
        if (!names[static_cast<std::size_t>(i)].empty()) {
            return static_cast<PrecisionLevel>(i);
        }
    }
    return std::nullopt;
}

void validate(const CorpusConfig& config) {
    if (config.vocab_size <= 0) throw ValidationError("vocab_size must be positive");
    if (config.feature_dim <= 0) throw ValidationError("feature_dim must be positive");
    if (config.caption_length < 4) {
        throw ValidationError("caption_length must be at least 4 (one toy mention plus terminator)");
    }
    if (config.n_samples <= 0) throw ValidationError("n_samples must be positive");
    if (!(config.hard_fraction >= 0.0 && config.hard_fraction <= 1.0)) {
        throw ValidationError("hard_fraction must lie in [0, 1]");
    }
    if (config.toys_per_sample_min < 1) {
        throw ValidationError("toys_per_sample_min must be at least 1");
    }
    if (config.toys_per_sample_max < config.toys_per_sample_min) {
        throw ValidationError("toys_per_sample_max must be >= toys_per_sample_min");
    }
    if (config.n_toys < config.toys_per_sample_max) {
        throw ValidationError("n_toys must be >= toys_per_sample_max");
    }
    if (config.noise_sigma < 0.0) throw ValidationError("noise_sigma must be nonnegative");
    if (config.hard_signal_scale <= 0.0) {
        throw ValidationError("hard_signal_scale must be positive");
    }
    if (!(config.background_mention_rate >= 0.0 && config.background_mention_rate <= 1.0)) {
        throw ValidationError("background_mention_rate must lie in [0, 1]");
    }
    const int tokens_needed = kFirstToyToken + 3 * config.n_toys;
    if (config.vocab_size < tokens_needed) {
        std::ostringstream os;
        os << "vocab_size " << config.vocab_size << " too small for " << config.n_toys
           << " toys: need at least " << tokens_needed
           << " (3 reserved tokens plus 3 name tokens per toy)";
        throw ValidationError(os.str());
    }
}

Dataset generate_corpus(const CorpusConfig& config) {
    validate(config);

    const int id_width = std::max(2, static_cast<int>(std::to_string(config.n_toys - 1).size()));

    Dataset dataset;
    dataset.header.schema_version = 1;
    dataset.header.feature_dim = config.feature_dim;
    dataset.header.caption_length = config.caption_length;
    dataset.header.config = config;
    auto& vocab = dataset.header.vocab;
    vocab.resize(static_cast<std::size_t>(config.vocab_size));
    vocab[kEosToken] = "<eos>";
    vocab[kFillerToken] = "<filler>";
    vocab[kBosToken] = "<bos>";
    for (int t = 0; t < config.n_toys; ++t) {
        const int base = kFirstToyToken + 3 * t;
        const std::string id = pad_id("toy", t, id_width);
        vocab[static_cast<std::size_t>(base + 0)] = id + "_low";
        vocab[static_cast<std::size_t>(base + 1)] = id + "_med";
        vocab[static_cast<std::size_t>(base + 2)] = id + "_high";
    }
    for (int v = kFirstToyToken + 3 * config.n_toys; v < config.vocab_size; ++v) {
        vocab[static_cast<std::size_t>(v)] =
            pad_id("decoy", v - kFirstToyToken - 3 * config.n_toys, 2);
    }

    // One fixed direction per toy, drawn from a dedicated stream so that the
    // directions depend only on (seed, n_toys, feature_dim).
    Rng dir_rng(splitmix64(config.seed ^ kToyDirectionTag));
    std::vector<std::vector<double>> directions(static_cast<std::size_t>(config.n_toys));
    for (auto& dir : directions) {
        dir.resize(static_cast<std::size_t>(config.feature_dim));
        double norm_sq = 0.0;
        for (auto& x : dir) {
            x = dir_rng.normal();
            norm_sq += x * x;
        }
        const double norm = std::sqrt(norm_sq);
        if (norm < 1e-12) throw InternalError("degenerate toy direction draw");
        for (auto& x : dir) x /= norm;
    }

    const long long n_hard_samples =
        std::llround(config.hard_fraction * static_cast<double>(config.n_samples));
    // Hard samples draw every toy from the hard pool and easy samples from the
    // easy pool, so the two worlds share no toys at all. The easy pool is kept
    // minimal and the hard pool takes the rest of the inventory: each hard toy
    // is then rare in training captions, and a policy reduced to guessing
    // among hard toys usually names one that is not in the image.
    int n_hard_toys = 0;
    if (n_hard_samples > 0) {
        if (n_hard_samples == config.n_samples) {
            n_hard_toys = config.n_toys;
        } else {
            const int easy_pool = std::min(config.toys_per_sample_max + 2,
                                           config.n_toys - config.toys_per_sample_max);
            if (easy_pool < config.toys_per_sample_max) {
                throw ValidationError(
                    "n_toys too small to split hard and easy toy pools at this "
                    "toys_per_sample_max");
            }
            n_hard_toys = config.n_toys - easy_pool;
        }
    }
    const int first_hard_toy = config.n_toys - n_hard_toys;
    const int max_fg = std::max(1, (config.caption_length - 1) / 3);

    dataset.samples.resize(static_cast<std::size_t>(config.n_samples));
    long long hard_so_far = 0;
    for (int i = 0; i < config.n_samples; ++i) {
        // Spread hard samples evenly over the index range, hitting the exact
        // requested count.
        const bool hard =
            (static_cast<long long>(i + 1) * n_hard_samples) / config.n_samples > hard_so_far;
        if (hard) ++hard_so_far;

        Rng rng(splitmix64(config.seed ^ static_cast<std::uint64_t>(i)));
        Sample& sample = dataset.samples[static_cast<std::size_t>(i)];
        sample.sample_id = pad_id("s", i, 6);
        sample.prompt_id = i % 4;
        sample.hardness = hard ? Hardness::Hard : Hardness::Easy;

        const int pool_begin = hard ? first_hard_toy : 0;
        const int pool_size = hard ? n_hard_toys : (config.n_toys - n_hard_toys);
        const int k = rng.uniform_int(config.toys_per_sample_min, config.toys_per_sample_max);

        // Partial Fisher-Yates over the pool for k distinct toys.
        std::vector<int> pool(static_cast<std::size_t>(pool_size));
        std::iota(pool.begin(), pool.end(), pool_begin);
        for (int j = 0; j < k; ++j) {
            const int swap = rng.uniform_int(j, pool_size - 1);
            std::swap(pool[static_cast<std::size_t>(j)], pool[static_cast<std::size_t>(swap)]);
        }

        const int n_fg = std::min(k, max_fg);
        sample.toys.resize(static_cast<std::size_t>(k));
        for (int j = 0; j < k; ++j) {
            const int toy = pool[static_cast<std::size_t>(j)];
            ToyAnnotation& ann = sample.toys[static_cast<std::size_t>(j)];
            ann.canonical_id = pad_id("toy", toy, id_width);
            ann.role = j < n_fg ? ToyRole::Foreground : ToyRole::Background;
            const int base = kFirstToyToken + 3 * toy;
            ann.names_at(PrecisionLevel::Low) = {TokenSeq{base + 0}};
            ann.names_at(PrecisionLevel::Medium) = {TokenSeq{base + 1}};
            ann.names_at(PrecisionLevel::High) = {TokenSeq{base + 2}};
        }

        // Caption layout: each foreground toy contributes its low, medium and
        // high name in order; background toys get a low mention with the
        // configured rate while space remains; filler pads; <eos> terminates.
        TokenSeq& gt = sample.ground_truth;
        gt.reserve(static_cast<std::size_t>(config.caption_length));
        for (int j = 0; j < n_fg; ++j) {
            const int base = kFirstToyToken + 3 * pool[static_cast<std::size_t>(j)];
            gt.push_back(base + 0);
            gt.push_back(base + 1);
            gt.push_back(base + 2);
        }
        for (int j = n_fg; j < k; ++j) {
            const double u = rng.uniform01();
            if (u < config.background_mention_rate &&
                static_cast<int>(gt.size()) < config.caption_length - 1) {
                gt.push_back(kFirstToyToken + 3 * pool[static_cast<std::size_t>(j)]);
            }
        }
        while (static_cast<int>(gt.size()) < config.caption_length - 1) {
            gt.push_back(kFillerToken);
        }
        gt.push_back(kEosToken);

        auto& features = sample.features;
        features.assign(static_cast<std::size_t>(config.feature_dim), 0.0);
        for (int j = 0; j < k; ++j) {
            const int toy = pool[static_cast<std::size_t>(j)];
            const double scale = toy >= first_hard_toy ? config.hard_signal_scale : 1.0;
            const auto& dir = directions[static_cast<std::size_t>(toy)];
            for (int m = 0; m < config.feature_dim; ++m) {
                features[static_cast<std::size_t>(m)] += scale * dir[static_cast<std::size_t>(m)];
            }
        }
        for (int m = 0; m < config.feature_dim; ++m) {
            features[static_cast<std::size_t>(m)] += config.noise_sigma * rng.normal();
        }
    }
    if (hard_so_far != n_hard_samples) throw InternalError("hard sample spread miscounted");
    return dataset;
}

namespace {

json phrase_to_json(const Phrase& phrase) {
    if (const auto* tokens = std::get_if<TokenSeq>(&phrase)) return json(*tokens);
    return json(std::get<std::string>(phrase));
}

json sample_to_json(const Sample& sample) {
    json names_by_level = json::object();
    json toys = json::array();
    for (const auto& toy : sample.toys) {
        json names = json::object();
        for (PrecisionLevel level : kAllLevels) {
            json list = json::array();
            for (const auto& phrase : toy.names_at(level)) list.push_back(phrase_to_json(phrase));
            names[to_string(level)] = std::move(list);
        }
        toys.push_back({{"canonical_id", toy.canonical_id},
                        {"role", to_string(toy.role)},
                        {"names", std::move(names)}});
    }
    return json{{"sample_id", sample.sample_id},
                {"features", sample.features},
                {"prompt_id", sample.prompt_id},
                {"ground_truth", sample.ground_truth},
                {"toys", std::move(toys)},
                {"hardness", to_string(sample.hardness)}};
}

const json& require_field(const json& obj, const char* field) {
    auto it = obj.find(field);
    if (it == obj.end()) throw DataError(std::string("missing field \"") + field + "\"");
    return *it;
}

Phrase phrase_from_json(const json& value, const char* field) {
    if (value.is_string()) return value.get<std::string>();
    if (value.is_array()) {
        TokenSeq tokens;
        tokens.reserve(value.size());
        for (const auto& tok : value) {
            if (!tok.is_number_integer()) {
                throw DataError(std::string("field \"") + field +
                                "\": token-sequence name must contain only integers");
            }
            tokens.push_back(tok.get<int>());
        }
        return tokens;
    }
    throw DataError(std::string("field \"") + field +
                    "\": name must be a token array or a string");
}

Sample sample_from_json(const json& obj) {
    Sample sample;
    const json& sid = require_field(obj, "sample_id");
    if (!sid.is_string()) throw DataError("field \"sample_id\": expected string");
    sample.sample_id = sid.get<std::string>();

    const json& features = require_field(obj, "features");
    if (!features.is_array()) throw DataError("field \"features\": expected array");
    for (const auto& x : features) {
        if (!x.is_number()) throw DataError("field \"features\": expected numbers");
        sample.features.push_back(x.get<double>());
    }

    const json& prompt_id = require_field(obj, "prompt_id");
    if (!prompt_id.is_number_integer()) throw DataError("field \"prompt_id\": expected integer");
    sample.prompt_id = prompt_id.get<int>();

    const json& gt = require_field(obj, "ground_truth");
    if (!gt.is_array()) throw DataError("field \"ground_truth\": expected array");
    for (const auto& tok : gt) {
        if (!tok.is_number_integer()) throw DataError("field \"ground_truth\": expected integers");
        sample.ground_truth.push_back(tok.get<int>());
    }

    const json& toys = require_field(obj, "toys");
    if (!toys.is_array()) throw DataError("field \"toys\": expected array");
    for (const auto& toy_json : toys) {
        if (!toy_json.is_object()) throw DataError("field \"toys\": expected objects");
        ToyAnnotation toy;
        const json& cid = require_field(toy_json, "canonical_id");
        if (!cid.is_string()) throw DataError("field \"canonical_id\": expected string");
        toy.canonical_id = cid.get<std::string>();
        const json& role = require_field(toy_json, "role");
        if (!role.is_string()) throw DataError("field \"role\": expected string");
        toy.role = toy_role_from_string(role.get<std::string>());
        const json& names = require_field(toy_json, "names");
        if (!names.is_object()) throw DataError("field \"names\": expected object");
        for (const auto& [key, list] : names.items()) {
            const PrecisionLevel level = precision_level_from_string(key);
            if (!list.is_array()) {
                throw DataError("field \"names." + key + "\": expected array");
            }
            for (const auto& name : list) {
                toy.names_at(level).push_back(phrase_from_json(name, "names"));
            }
        }
        sample.toys.push_back(std::move(toy));
    }

    const json& hardness = require_field(obj, "hardness");
    if (!hardness.is_string()) throw DataError("field \"hardness\": expected string");
    sample.hardness = hardness_from_string(hardness.get<std::string>());
    return sample;
}

json corpus_config_to_json(const CorpusConfig& config) {
    return json{{"vocab_size", config.vocab_size},
                {"feature_dim", config.feature_dim},
                {"caption_length", config.caption_length},
                {"n_samples", config.n_samples},
                {"hard_fraction", config.hard_fraction},
                {"toys_per_sample_min", config.toys_per_sample_min},
                {"toys_per_sample_max", config.toys_per_sample_max},
                {"n_toys", config.n_toys},
                {"noise_sigma", config.noise_sigma},
                {"hard_signal_scale", config.hard_signal_scale},
                {"background_mention_rate", config.background_mention_rate},
                {"seed", config.seed}};
}

CorpusConfig corpus_config_from_json(const json& obj) {
    try {
        CorpusConfig config;
        config.vocab_size = obj.at("vocab_size").get<int>();
        config.feature_dim = obj.at("feature_dim").get<int>();
        config.caption_length = obj.at("caption_length").get<int>();
        config.n_samples = obj.at("n_samples").get<int>();
        config.hard_fraction = obj.at("hard_fraction").get<double>();
        config.toys_per_sample_min = obj.at("toys_per_sample_min").get<int>();
        config.toys_per_sample_max = obj.at("toys_per_sample_max").get<int>();
        config.n_toys = obj.at("n_toys").get<int>();
        config.noise_sigma = obj.at("noise_sigma").get<double>();
        config.hard_signal_scale = obj.at("hard_signal_scale").get<double>();
        config.background_mention_rate = obj.at("background_mention_rate").get<double>();
        config.seed = obj.at("seed").get<std::uint64_t>();
        return config;
    } catch (const json::exception& e) {
        throw DataError(std::string("field \"config\": malformed corpus config: ") + e.what());
    }
}

DatasetHeader header_from_json(const json& obj) {
    DatasetHeader header;
    const json& version = require_field(obj, "schema_version");
    if (!version.is_number_integer()) {
        throw DataError("field \"schema_version\": expected integer");
    }
    header.schema_version = version.get<int>();
    if (header.schema_version != 1) {
        throw DataError("field \"schema_version\": unsupported version " +
                        std::to_string(header.schema_version));
    }
    const json& vocab = require_field(obj, "vocab");
    if (!vocab.is_array()) throw DataError("field \"vocab\": expected array");
    for (const auto& word : vocab) {
        if (!word.is_string()) throw DataError("field \"vocab\": expected strings");
        header.vocab.push_back(word.get<std::string>());
    }
    const json& d = require_field(obj, "feature_dim");
    if (!d.is_number_integer()) throw DataError("field \"feature_dim\": expected integer");
    header.feature_dim = d.get<int>();
    const json& len = require_field(obj, "caption_length");
    if (!len.is_number_integer()) throw DataError("field \"caption_length\": expected integer");
    header.caption_length = len.get<int>();
    if (obj.contains("config")) header.config = corpus_config_from_json(obj.at("config"));
    return header;
}

}  // namespace

std::string serialize_dataset(const Dataset& dataset) {
    std::string out;
    json header{{"schema_version", dataset.header.schema_version},
                {"vocab", dataset.header.vocab},
                {"feature_dim", dataset.header.feature_dim},
                {"caption_length", dataset.header.caption_length}};
    if (dataset.header.config.has_value()) {
        header["config"] = corpus_config_to_json(*dataset.header.config);
    }
    out += header.dump();
    out += '\n';
    for (const auto& sample : dataset.samples) {
        out += sample_to_json(sample).dump();
        out += '\n';
    }
    return out;
}

void write_dataset(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open \"" + path + "\" for writing");
    const std::string body = serialize_dataset(dataset);
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out) throw DataError("write failed for \"" + path + "\"");
}

Dataset read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open \"" + path + "\" for reading");

    Dataset dataset;
    std::string line;
    long line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError(path + " line " + std::to_string(line_no) +
                            ": invalid JSON: " + e.what());
        }
        try {
            if (!have_header) {
                dataset.header = header_from_json(obj);
                have_header = true;
            } else {
                Sample sample = sample_from_json(obj);
                validate_sample(sample, dataset.header);
                dataset.samples.push_back(std::move(sample));
            }
        } catch (const DataError& e) {
            throw DataError(path + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return dataset;
}

std::string corpus_hash(const Dataset& dataset) {
    return hex64(fnv1a64(serialize_dataset(dataset)));
}

void validate_sample(const Sample& sample, const DatasetHeader& header) {
    const std::string where = "sample \"" + sample.sample_id + "\": ";
    if (static_cast<int>(sample.features.size()) != header.feature_dim) {
        throw DataError(where + "features has dimension " +
                        std::to_string(sample.features.size()) + ", header declares " +
                        std::to_string(header.feature_dim));
    }
    for (double x : sample.features) {
        if (!std::isfinite(x)) throw DataError(where + "features contains a non-finite value");
    }
    if (static_cast<int>(sample.ground_truth.size()) != header.caption_length) {
        throw DataError(where + "ground_truth has length " +
                        std::to_string(sample.ground_truth.size()) + ", header declares " +
                        std::to_string(header.caption_length));
    }
    for (int tok : sample.ground_truth) {
        if (tok < 0 || tok >= header.vocab_size()) {
            throw DataError(where + "ground_truth token " + std::to_string(tok) +
                            " outside the vocabulary");
        }
    }
    std::set<std::string> seen_ids;
    for (const auto& toy : sample.toys) {
        if (toy.canonical_id.empty()) throw DataError(where + "toy with empty canonical_id");
        if (!seen_ids.insert(toy.canonical_id).second) {
            throw DataError(where + "duplicate toy \"" + toy.canonical_id + "\"");
        }
        // Name lists at different levels must be pairwise disjoint.
        for (int a = 0; a < 3; ++a) {
            for (int b = a + 1; b < 3; ++b) {
                for (const auto& pa : toy.names[static_cast<std::size_t>(a)]) {
                    for (const auto& pb : toy.names[static_cast<std::size_t>(b)]) {
                        if (pa == pb) {
                            throw DataError(where + "toy \"" + toy.canonical_id +
                                            "\" repeats a name across precision levels");
                        }
                    }
                }
            }
        }
        for (PrecisionLevel level : kAllLevels) {
            for (const auto& phrase : toy.names_at(level)) {
                if (const auto* tokens = std::get_if<TokenSeq>(&phrase)) {
                    if (tokens->empty()) {
                        throw DataError(where + "toy \"" + toy.canonical_id +
                                        "\" has an empty token-sequence name");
                    }
                    for (int tok : *tokens) {
                        if (tok < 0 || tok >= header.vocab_size()) {
                            throw DataError(where + "toy \"" + toy.canonical_id +
                                            "\" name token " + std::to_string(tok) +
                                            " outside the vocabulary");
                        }
                    }
                } else if (std::get<std::string>(phrase).empty()) {
                    throw DataError(where + "toy \"" + toy.canonical_id +
                                    "\" has an empty text name");
                }
            }
        }
        if (toy.role == ToyRole::Foreground) {
            if (auto top = toy.highest_populated()) {
                bool mentioned = false;
                for (const auto& phrase : toy.names_at(*top)) {
                    const auto* tokens = std::get_if<TokenSeq>(&phrase);
                    if (tokens && contains_tokens(sample.ground_truth, *tokens)) {
                        mentioned = true;
                        break;
                    }
                }
                if (!mentioned) {
                    throw DataError(where + "foreground toy \"" + toy.canonical_id +
                                    "\" is not mentioned in ground_truth at its highest "
                                    "populated precision level");
                }
            }
        }
    }
    return;
}

std::vector<ToyAnnotation> toy_inventory(const Dataset& dataset) {
    std::vector<ToyAnnotation> inventory;
    std::set<std::string> seen;
    for (const auto& sample : dataset.samples) {
        for (const auto& toy : sample.toys) {
            if (seen.insert(toy.canonical_id).second) inventory.push_back(toy);
        }
    }
    return inventory;
}

}  // namespace caplab
