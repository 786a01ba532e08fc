#include "caplab/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

namespace caplab {

std::string normalize_text(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char c : text) {
        const unsigned char uc = static_cast<unsigned char>(c);
        if (std::isspace(uc)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(uc)));
    }
    return out;
}

namespace {

bool contains_tokens(const TokenSeq& hay, const TokenSeq& needle) {
    if (needle.empty() || needle.size() > hay.size()) return false;
    for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
        if (std::equal(needle.begin(), needle.end(), hay.begin() + i)) return true;
    }
    return false;
}

}  // namespace

bool match_toy(const Phrase& caption, const std::vector<Phrase>& variants) {
    if (const auto* tokens = std::get_if<TokenSeq>(&caption)) {
        for (const auto& variant : variants) {
            const auto* name = std::get_if<TokenSeq>(&variant);
            if (name && contains_tokens(*tokens, *name)) return true;
        }
        return false;
    }
    const std::string text = normalize_text(std::get<std::string>(caption));
    for (const auto& variant : variants) {
        const auto* name = std::get_if<std::string>(&variant);
        if (!name) continue;
        const std::string needle = normalize_text(*name);
        if (!needle.empty() && text.find(needle) != std::string::npos) return true;
    }
    return false;
}

bool gamma(const ToyAnnotation& toy, PrecisionLevel level,
           const std::vector<Phrase>& candidates) {
    const auto& variants = toy.names_at(level);
    for (const auto& candidate : candidates) {
        if (match_toy(candidate, variants)) return true;
    }
    return false;
}

std::string to_string(TtsPooling pooling) {
    switch (pooling) {
        case TtsPooling::Pooled: return "pooled";
        case TtsPooling::PerImageMean: return "per_image_mean";
    }
    throw InternalError("invalid TtsPooling value");
}

TtsPooling tts_pooling_from_string(const std::string& s) {
    if (s == "pooled") return TtsPooling::Pooled;
    if (s == "per_image_mean") return TtsPooling::PerImageMean;
    throw ValidationError("unknown tts pooling \"" + s + "\" (want pooled or per_image_mean)");
}

TtsReport tts(const std::vector<Sample>& samples,
              const std::vector<std::vector<Phrase>>& candidates_per_sample,
              TtsPooling pooling) {
    if (samples.size() != candidates_per_sample.size()) {
        throw ValidationError("tts: samples and candidate lists are misaligned");
    }
    TtsReport report;
    report.pooling = pooling;

    // Per-image accumulators for the per-image-mean variant.
    std::array<std::array<double, 3>, 2> rate_sums{};
    std::array<std::array<long long, 3>, 2> rate_images{};
    double aggregate_rate_sum = 0.0;
    long long aggregate_images = 0;

    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& candidates = candidates_per_sample[i];
        std::array<std::array<long long, 3>, 2> image_matched{};
        std::array<std::array<long long, 3>, 2> image_total{};
        for (const auto& toy : samples[i].toys) {
            const std::size_t r = toy.role == ToyRole::Foreground ? 0 : 1;
            for (PrecisionLevel level : kAllLevels) {
                if (!toy.has_level(level)) continue;
                const std::size_t l = static_cast<std::size_t>(level);
                image_total[r][l] += 1;
                if (gamma(toy, level, candidates)) image_matched[r][l] += 1;
            }
        }
        long long image_matched_all = 0;
        long long image_total_all = 0;
        for (std::size_t r = 0; r < 2; ++r) {
            for (std::size_t l = 0; l < 3; ++l) {
                report.cells[r][l].matched += image_matched[r][l];
                report.cells[r][l].total += image_total[r][l];
                image_matched_all += image_matched[r][l];
                image_total_all += image_total[r][l];
                if (image_total[r][l] > 0) {
                    rate_sums[r][l] += static_cast<double>(image_matched[r][l]) /
                                       static_cast<double>(image_total[r][l]);
                    rate_images[r][l] += 1;
                }
            }
        }
        if (image_total_all > 0) {
            aggregate_rate_sum += static_cast<double>(image_matched_all) /
                                  static_cast<double>(image_total_all);
            aggregate_images += 1;
        }
        report.aggregate_matched += image_matched_all;
        report.aggregate_total += image_total_all;
    }

    if (report.aggregate_total == 0) {
        throw ValidationError("tts: empty evaluation, no toy instance has a populated level");
    }

    for (std::size_t r = 0; r < 2; ++r) {
        for (std::size_t l = 0; l < 3; ++l) {
            CellStats& cell = report.cells[r][l];
            if (cell.total == 0) continue;
            if (pooling == TtsPooling::Pooled) {
                cell.rate = static_cast<double>(cell.matched) / static_cast<double>(cell.total);
            } else {
                cell.rate = rate_sums[r][l] / static_cast<double>(rate_images[r][l]);
            }
        }
    }
    if (pooling == TtsPooling::Pooled) {
        report.aggregate = static_cast<double>(report.aggregate_matched) /
                           static_cast<double>(report.aggregate_total);
    } else {
        report.aggregate = aggregate_rate_sum / static_cast<double>(aggregate_images);
    }
    return report;
}

PrecisionStats toy_precision(const std::set<std::string>& predicted,
                             const std::set<std::string>& ground_truth) {
    PrecisionStats stats;
    stats.predicted = static_cast<long long>(predicted.size());
    for (const auto& name : predicted) {
        if (ground_truth.count(name)) stats.correct += 1;
    }
    if (stats.predicted > 0) {
        stats.precision =
            static_cast<double>(stats.correct) / static_cast<double>(stats.predicted);
    }
    return stats;
}

std::set<std::string> extract_toys(const Phrase& caption,
                                   const std::vector<ToyAnnotation>& inventory) {
    std::set<std::string> found;
    for (const auto& toy : inventory) {
        for (PrecisionLevel level : kAllLevels) {
            if (match_toy(caption, toy.names_at(level))) {
                found.insert(toy.canonical_id);
                break;
            }
        }
    }
    return found;
}

PrecisionReport precision_report(const std::vector<Sample>& samples,
                                 const std::vector<std::vector<Phrase>>& candidates_per_sample,
                                 const std::vector<ToyAnnotation>& inventory) {
    if (samples.size() != candidates_per_sample.size()) {
        throw ValidationError("precision_report: samples and candidate lists are misaligned");
    }
    PrecisionReport report;
    report.images = static_cast<long long>(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        std::set<std::string> predicted;
        for (const auto& candidate : candidates_per_sample[i]) {
            auto found = extract_toys(candidate, inventory);
            predicted.insert(found.begin(), found.end());
        }
        std::set<std::string> annotated;
        for (const auto& toy : samples[i].toys) annotated.insert(toy.canonical_id);
        const PrecisionStats stats = toy_precision(predicted, annotated);
        report.predicted_total += stats.predicted;
        report.correct_total += stats.correct;
    }
    if (report.images > 0) {
        report.mean_count =
            static_cast<double>(report.predicted_total) / static_cast<double>(report.images);
    }
    if (report.predicted_total > 0) {
        report.pooled_precision =
            static_cast<double>(report.correct_total) / static_cast<double>(report.predicted_total);
    }
    return report;
}

std::vector<double> midranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        // Positions i..j (0-based) share the mean 1-based rank.
        const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

namespace {

void check_rank_inputs(const std::vector<double>& a, const std::vector<double>& b,
                       const char* op) {
    if (a.size() != b.size()) {
        throw ValidationError(std::string(op) + ": rankings have different lengths");
    }
    if (a.size() < 2) {
        throw ValidationError(std::string(op) + ": need at least 2 items");
    }
}

}  // namespace

double kendall_tau(const std::vector<double>& a, const std::vector<double>& b) {
    check_rank_inputs(a, b, "kendall_tau");
    const std::size_t n = a.size();
    long long concordant_minus_discordant = 0;
    long long tied_a = 0;
    long long tied_b = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double da = a[i] - a[j];
            const double db = b[i] - b[j];
            if (da == 0.0) ++tied_a;
            if (db == 0.0) ++tied_b;
            if (da == 0.0 || db == 0.0) continue;
            concordant_minus_discordant += (da > 0.0) == (db > 0.0) ? 1 : -1;
        }
    }
    const long long pairs = static_cast<long long>(n) * static_cast<long long>(n - 1) / 2;
    if (tied_a == pairs || tied_b == pairs) {
        throw ValidationError("kendall_tau: a ranking is fully tied, tau-b is undefined");
    }
    const double denom = std::sqrt(static_cast<double>(pairs - tied_a) *
                                   static_cast<double>(pairs - tied_b));
    return static_cast<double>(concordant_minus_discordant) / denom;
}

double spearman_rho(const std::vector<double>& a, const std::vector<double>& b) {
    check_rank_inputs(a, b, "spearman_rho");
    const std::vector<double> ra = midranks(a);
    const std::vector<double> rb = midranks(b);
    const std::size_t n = ra.size();
    double mean_a = 0.0;
    double mean_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_a += ra[i];
        mean_b += rb[i];
    }
    mean_a /= static_cast<double>(n);
    mean_b /= static_cast<double>(n);
    double cov = 0.0;
    double var_a = 0.0;
    double var_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double xa = ra[i] - mean_a;
        const double xb = rb[i] - mean_b;
        cov += xa * xb;
        var_a += xa * xa;
        var_b += xb * xb;
    }
    if (var_a == 0.0 || var_b == 0.0) {
        throw ValidationError("spearman_rho: a rank vector has zero variance");
    }
    return cov / std::sqrt(var_a * var_b);
}

}  // namespace caplab
