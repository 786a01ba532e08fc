#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "caplab/corpus.hpp"

namespace caplab {

// Trim, ASCII case-fold, collapse internal whitespace runs to single spaces.
std::string normalize_text(const std::string& text);

// True iff any variant occurs in the caption: contiguous subsequence in token
// mode, normalized substring in text mode. Token captions never match text
// variants and vice versa. Empty variant list yields false.
bool match_toy(const Phrase& caption, const std::vector<Phrase>& variants);

// OR of match_toy over all candidates against the toy's names at one level.
bool gamma(const ToyAnnotation& toy, PrecisionLevel level,
           const std::vector<Phrase>& candidates);

struct CellStats {
    long long matched = 0;
    long long total = 0;
    // Absent when total == 0; such cells are never reported as 0 or 1.
    std::optional<double> rate;

    bool operator==(const CellStats&) const = default;
};

enum class TtsPooling {
    // Rates are matched/total pooled over every toy instance in the dataset.
    Pooled,
    // Per-image rates averaged over the images where the cell is populated.
    PerImageMean,
};

std::string to_string(TtsPooling pooling);
TtsPooling tts_pooling_from_string(const std::string& s);

struct TtsReport {
    // Indexed [role][level] with Foreground = 0, Background = 1.
    std::array<std::array<CellStats, 3>, 2> cells;
    long long aggregate_matched = 0;
    long long aggregate_total = 0;
    double aggregate = 0.0;
    TtsPooling pooling = TtsPooling::Pooled;

    const CellStats& cell(ToyRole role, PrecisionLevel level) const {
        return cells[role == ToyRole::Foreground ? 0 : 1][static_cast<std::size_t>(level)];
    }
    CellStats& cell(ToyRole role, PrecisionLevel level) {
        return cells[role == ToyRole::Foreground ? 0 : 1][static_cast<std::size_t>(level)];
    }
};

// Scores candidates_per_sample[i] against samples[i]. A toy instance is one
// (sample, toy, level) triple whose name list at that level is nonempty.
// Throws ValidationError when the inputs are misaligned or when the dataset
// contributes no toy instance at all.
TtsReport tts(const std::vector<Sample>& samples,
              const std::vector<std::vector<Phrase>>& candidates_per_sample,
              TtsPooling pooling = TtsPooling::Pooled);

struct PrecisionStats {
    long long predicted = 0;
    long long correct = 0;
    // Absent when nothing was predicted.
    std::optional<double> precision;

    bool operator==(const PrecisionStats&) const = default;
};

// Eq.-style set precision: |pred ∩ gt| / |pred|.
PrecisionStats toy_precision(const std::set<std::string>& predicted,
                             const std::set<std::string>& ground_truth);

// Dictionary matcher: canonical ids of every inventory toy any of whose names
// (any level) occurs in the caption.
std::set<std::string> extract_toys(const Phrase& caption,
                                   const std::vector<ToyAnnotation>& inventory);

struct PrecisionReport {
    long long images = 0;
    long long predicted_total = 0;
    long long correct_total = 0;
    double mean_count = 0.0;
    // Pooled correct/predicted; absent when nothing was predicted anywhere.
    std::optional<double> pooled_precision;
};

// Per image: predicted = union of extract_toys over its candidates,
// ground truth = the image's annotated canonical ids.
PrecisionReport precision_report(const std::vector<Sample>& samples,
                                 const std::vector<std::vector<Phrase>>& candidates_per_sample,
                                 const std::vector<ToyAnnotation>& inventory);

// Average ranks (1-based); tied values share the mean of their positions.
std::vector<double> midranks(const std::vector<double>& values);

// Tie-corrected tau-b. Equals (concordant - discordant) / C(n,2) when
// tie-free. Throws ValidationError on size mismatch, n < 2, or a fully tied
// input (tau-b undefined).
double kendall_tau(const std::vector<double>& a, const std::vector<double>& b);

// Pearson correlation of midranked vectors. Throws ValidationError on size
// mismatch, n < 2, or zero rank variance.
double spearman_rho(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace caplab
