#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tagmine/corpus.hpp"
#include "tagmine/matrix.hpp"
#include "tagmine/vocab.hpp"

namespace tagmine::evalkit {

// Per-image score vectors plus ground-truth tag sets over a shared category
// space of size C. Truth ids are sorted ascending per image.
struct ScoredPredictions {
    std::vector<std::string> image_ids;
    Matrix scores;                        // n_images x C
    std::vector<std::vector<int>> truth;  // per image, ids < C
};

// AP for one category: images ranked by descending score (ties by ascending
// image index, stable), AP = mean over positives of precision at their ranks.
// nullopt when the category has no positives (excluded from mAP).
std::optional<double> average_precision(const std::vector<double>& scores,
                                        const std::vector<int>& truth);

// Unweighted mean of AP over categories with at least one positive; an
// optional id subset restricts evaluation to overlapping categories.
double mean_ap(const ScoredPredictions& preds,
               const std::vector<int>* category_subset = nullptr);

struct PrfMetrics {
    double micro_precision = 0.0;
    double micro_recall = 0.0;
    double micro_f1 = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
};

// Predictions are cells with score strictly above the threshold. Micro pools
// TP/FP/FN over all cells; macro averages per-category P and R over categories
// with positives and takes the harmonic mean of the two averages.
PrfMetrics prf_at_threshold(const ScoredPredictions& preds, double threshold,
                            const std::vector<int>* category_subset = nullptr);

struct SweepPoint {
    double threshold = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::uint64_t predicted_tags = 0;
};

// One micro evaluation per grid point; the grid must be strictly increasing
// and the recall column is monotone non-increasing along it.
std::vector<SweepPoint> threshold_sweep(const ScoredPredictions& preds,
                                        const std::vector<double>& grid);

// Captioning evaluation paradigm: parse each caption, project to tags, resolve
// against the vocabulary, union per image, then score the resulting binary
// predictions against truth.
PrfMetrics eval_caption_as_tagger(
    const std::vector<std::pair<std::string, std::string>>& captions,
    const std::vector<corpus::ImageTagSet>& truth, const vocab::TagVocabulary& vocab);

// Fraction of queries whose top-k ranked ids contain at least one relevant id.
double recall_at_k(const std::vector<std::vector<std::string>>& ranked_ids,
                   const std::vector<std::vector<std::string>>& relevant, std::size_t k);

}  // namespace tagmine::evalkit
