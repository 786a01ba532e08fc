#include "caplab/rankstudy.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "caplab/corpus.hpp"
#include "caplab/metrics.hpp"
#include "caplab/rng.hpp"

namespace caplab {

using nlohmann::json;

namespace {

constexpr std::uint64_t kStudyTag = 0x73747564792d3131ULL;

std::string id_of(const json& value, long line_no) {
    if (value.is_string()) return value.get<std::string>();
    if (value.is_number_integer()) return std::to_string(value.get<long long>());
    throw DataError("line " + std::to_string(line_no) + ": candidate ids must be strings");
}

}  // namespace

RankingFile read_rankings(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open \"" + path + "\" for reading");
    RankingFile rankings;
    std::set<std::string> seen;
    std::string line;
    long line_no = 0;
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
        auto image_it = obj.find("image_id");
        if (image_it == obj.end() || !image_it->is_string()) {
            throw DataError(path + " line " + std::to_string(line_no) +
                            ": missing string field \"image_id\"");
        }
        auto order_it = obj.find("order");
        if (order_it == obj.end() || !order_it->is_array()) {
            throw DataError(path + " line " + std::to_string(line_no) +
                            ": missing array field \"order\"");
        }
        RankedImage image;
        image.image_id = image_it->get<std::string>();
        if (!seen.insert(image.image_id).second) {
            throw DataError(path + " line " + std::to_string(line_no) + ": duplicate image \"" +
                            image.image_id + "\"");
        }
        for (const auto& candidate : *order_it) {
            image.order.push_back(id_of(candidate, line_no));
        }
        rankings.images.push_back(std::move(image));
    }
    return rankings;
}

std::string serialize_rankings(const RankingFile& rankings) {
    std::string out;
    for (const auto& image : rankings.images) {
        out += json{{"image_id", image.image_id}, {"order", image.order}}.dump();
        out += '\n';
    }
    return out;
}

CorrelationReport correlate_rankings(const RankingFile& a, const RankingFile& b) {
    std::map<std::string, const RankedImage*> b_by_id;
    for (const auto& image : b.images) b_by_id[image.image_id] = &image;
    if (a.images.size() != b_by_id.size() || b_by_id.size() != b.images.size()) {
        throw DataError("ranking files cover different image sets");
    }
    if (a.images.empty()) throw DataError("ranking files contain no images");

    CorrelationReport report;
    for (const auto& image_a : a.images) {
        auto it = b_by_id.find(image_a.image_id);
        if (it == b_by_id.end()) {
            throw DataError("image \"" + image_a.image_id + "\" is missing from one file");
        }
        const RankedImage& image_b = *it->second;
        if (image_a.order.size() < 2) {
            throw DataError("image \"" + image_a.image_id + "\" ranks fewer than 2 candidates");
        }

        std::map<std::string, double> rank_a;
        std::map<std::string, double> rank_b;
        for (std::size_t i = 0; i < image_a.order.size(); ++i) {
            if (!rank_a.emplace(image_a.order[i], static_cast<double>(i + 1)).second) {
                throw DataError("image \"" + image_a.image_id + "\" repeats candidate \"" +
                                image_a.order[i] + "\"");
            }
        }
        for (std::size_t i = 0; i < image_b.order.size(); ++i) {
            if (!rank_b.emplace(image_b.order[i], static_cast<double>(i + 1)).second) {
                throw DataError("image \"" + image_b.image_id + "\" repeats candidate \"" +
                                image_b.order[i] + "\"");
            }
        }
        if (rank_a.size() != rank_b.size()) {
            throw DataError("image \"" + image_a.image_id +
                            "\" has different candidate sets in the two files");
        }
        std::vector<double> va;
        std::vector<double> vb;
        for (const auto& [candidate, rank] : rank_a) {
            auto rb = rank_b.find(candidate);
            if (rb == rank_b.end()) {
                throw DataError("image \"" + image_a.image_id + "\" candidate \"" + candidate +
                                "\" is missing from one file");
            }
            va.push_back(rank);
            vb.push_back(rb->second);
        }
        CorrelationRow row;
        row.image_id = image_a.image_id;
        row.tau = kendall_tau(va, vb);
        row.rho = spearman_rho(va, vb);
        report.mean_tau += row.tau;
        report.mean_rho += row.rho;
        report.rows.push_back(std::move(row));
    }
    report.mean_tau /= static_cast<double>(report.rows.size());
    report.mean_rho /= static_cast<double>(report.rows.size());
    return report;
}

void validate(const RankStudyConfig& config) {
    if (config.images < 1) throw ValidationError("images must be at least 1");
    if (config.captions_per_image < 2) {
        throw ValidationError("captions_per_image must be at least 2");
    }
    if (!(config.noise >= 0.0 && config.noise <= 1.0)) {
        throw ValidationError("noise must lie in [0, 1]");
    }
    validate(config.reward);
}

namespace {

// Toy context for the planted captions. The quality ladder touches every
// reward ingredient: levels low through high on a foreground toy, then a
// background mention, then extra foreground toys at high precision.
struct StudyContext {
    std::vector<ToyAnnotation> toys;
    std::vector<Phrase> captions;  // index = planted quality tier
};

StudyContext build_context(int captions_per_image) {
    StudyContext ctx;
    auto make_toy = [](const std::string& id, ToyRole role, int base) {
        ToyAnnotation toy;
        toy.canonical_id = id;
        toy.role = role;
        toy.names_at(PrecisionLevel::Low) = {TokenSeq{base + 0}};
        toy.names_at(PrecisionLevel::Medium) = {TokenSeq{base + 1}};
        toy.names_at(PrecisionLevel::High) = {TokenSeq{base + 2}};
        return toy;
    };
    ctx.toys.push_back(make_toy("fg_base", ToyRole::Foreground, 10));
    ctx.toys.push_back(make_toy("bg_base", ToyRole::Background, 20));

    const TokenSeq filler{kFillerToken};
    std::vector<TokenSeq> ladder = {
        filler,            // tier 0: mentions nothing
        TokenSeq{10},      // tier 1: foreground at low
        TokenSeq{11},      // tier 2: foreground at medium
        TokenSeq{12},      // tier 3: foreground at high
        TokenSeq{12, 20},  // tier 4: foreground high plus background low
    };
    int extra_base = 30;
    while (static_cast<int>(ladder.size()) < captions_per_image) {
        const std::string id = "fg_extra" + std::to_string(ladder.size());
        ctx.toys.push_back(make_toy(id, ToyRole::Foreground, extra_base));
        TokenSeq caption = ladder.back();
        caption.push_back(extra_base + 2);  // one more foreground toy at high
        ladder.push_back(std::move(caption));
        extra_base += 10;
    }
    ladder.resize(static_cast<std::size_t>(captions_per_image));
    for (auto& caption : ladder) ctx.captions.emplace_back(std::move(caption));
    return ctx;
}

}  // namespace

RankStudyReport planted_quality_study(const RankStudyConfig& config) {
    validate(config);
    const StudyContext ctx = build_context(config.captions_per_image);
    const int k = config.captions_per_image;

    std::vector<double> rewards;
    rewards.reserve(static_cast<std::size_t>(k));
    for (const auto& caption : ctx.captions) {
        rewards.push_back(reward(caption, ctx.toys, config.reward));
    }

    RankStudyReport report;
    report.config = config;
    const std::uint64_t base = splitmix64(config.seed ^ kStudyTag);
    for (int i = 0; i < config.images; ++i) {
        Rng rng(splitmix64(base ^ static_cast<std::uint64_t>(i)));
        std::vector<double> planted(static_cast<std::size_t>(k));
        for (int q = 0; q < k; ++q) planted[static_cast<std::size_t>(q)] = q;
        if (rng.uniform01() < config.noise) {
            const int p = static_cast<int>(rng.uniform_int(0, k - 2));
            std::swap(planted[static_cast<std::size_t>(p)],
                      planted[static_cast<std::size_t>(p + 1)]);
            ++report.noisy_images;
        }
        CorrelationRow row;
        char image_id[16];
        std::snprintf(image_id, sizeof(image_id), "img%04d", i);
        row.image_id = image_id;
        row.tau = kendall_tau(rewards, planted);
        row.rho = spearman_rho(rewards, planted);
        report.correlation.mean_tau += row.tau;
        report.correlation.mean_rho += row.rho;
        report.correlation.rows.push_back(std::move(row));
    }
    report.correlation.mean_tau /= static_cast<double>(config.images);
    report.correlation.mean_rho /= static_cast<double>(config.images);
    return report;
}

}  // namespace caplab
