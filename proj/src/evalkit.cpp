#include "tagmine/evalkit.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <unordered_set>

#include "tagmine/errors.hpp"
#include "tagmine/semparse.hpp"

namespace tagmine::evalkit {

namespace {

void check_preds(const ScoredPredictions& preds) {
    if (preds.image_ids.size() != preds.scores.rows ||
        preds.truth.size() != preds.scores.rows)
        throw UsageError("predictions: image_ids, scores and truth must align");
    for (const auto& tags : preds.truth)
        for (int id : tags)
            if (id < 0 || static_cast<std::size_t>(id) >= preds.scores.cols)
                throw DataError("predictions: truth id " + std::to_string(id) +
                                " outside category space");
}

std::vector<std::size_t> active_categories(const ScoredPredictions& preds,
                                           const std::vector<int>* subset) {
    std::vector<std::size_t> cats;
    if (subset) {
        for (int id : *subset) {
            if (id < 0 || static_cast<std::size_t>(id) >= preds.scores.cols)
                throw UsageError("category subset id out of range");
            cats.push_back(static_cast<std::size_t>(id));
        }
    } else {
        cats.resize(preds.scores.cols);
        std::iota(cats.begin(), cats.end(), 0);
    }
    return cats;
}

double f1_of(double precision, double recall) {
    double sum = precision + recall;
    return sum == 0.0 ? 0.0 : 2.0 * precision * recall / sum;
}

}  // namespace

std::optional<double> average_precision(const std::vector<double>& scores,
                                        const std::vector<int>& truth) {
    if (scores.size() != truth.size())
        throw UsageError("average_precision: scores and truth must have equal length");
    std::size_t positives = 0;
    for (int t : truth) positives += (t != 0);
    if (positives == 0) return std::nullopt;

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];
    });

    double sum_precision = 0.0;
    std::size_t hits = 0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        if (truth[order[rank]] != 0) {
            ++hits;
            sum_precision += static_cast<double>(hits) / static_cast<double>(rank + 1);
        }
    }
    return sum_precision / static_cast<double>(positives);
}

double mean_ap(const ScoredPredictions& preds, const std::vector<int>* category_subset) {
    check_preds(preds);
    std::vector<std::unordered_set<int>> truth_sets;
    truth_sets.reserve(preds.truth.size());
    for (const auto& t : preds.truth) truth_sets.emplace_back(t.begin(), t.end());

    double total = 0.0;
    std::size_t defined = 0;
    for (std::size_t c : active_categories(preds, category_subset)) {
        std::vector<double> scores(preds.scores.rows);
        std::vector<int> truth(preds.scores.rows);
        for (std::size_t i = 0; i < preds.scores.rows; ++i) {
            scores[i] = preds.scores(i, c);
            truth[i] = truth_sets[i].count(static_cast<int>(c)) ? 1 : 0;
        }
        auto ap = average_precision(scores, truth);
        if (ap) {
            total += *ap;
            ++defined;
        }
    }
    if (defined == 0)
        throw UsageError("mean_ap: no category has a positive example");
    return total / static_cast<double>(defined);
}

PrfMetrics prf_at_threshold(const ScoredPredictions& preds, double threshold,
                            const std::vector<int>* category_subset) {
    check_preds(preds);
    std::vector<std::unordered_set<int>> truth_sets;
    truth_sets.reserve(preds.truth.size());
    for (const auto& t : preds.truth) truth_sets.emplace_back(t.begin(), t.end());

    std::uint64_t micro_tp = 0, micro_fp = 0, micro_fn = 0;
    double macro_p_sum = 0.0, macro_r_sum = 0.0;
    std::size_t macro_categories = 0;

    for (std::size_t c : active_categories(preds, category_subset)) {
        std::uint64_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < preds.scores.rows; ++i) {
            bool predicted = preds.scores(i, c) > threshold;
            bool actual = truth_sets[i].count(static_cast<int>(c)) != 0;
            tp += (predicted && actual);
            fp += (predicted && !actual);
            fn += (!predicted && actual);
        }
        micro_tp += tp;
        micro_fp += fp;
        micro_fn += fn;
        if (tp + fn > 0) {  // category has positives
            macro_p_sum += (tp + fp) == 0
                               ? 0.0
                               : static_cast<double>(tp) / static_cast<double>(tp + fp);
            macro_r_sum += static_cast<double>(tp) / static_cast<double>(tp + fn);
            ++macro_categories;
        }
    }

    PrfMetrics m;
    m.micro_precision = (micro_tp + micro_fp) == 0
                            ? 0.0
                            : static_cast<double>(micro_tp) /
                                  static_cast<double>(micro_tp + micro_fp);
    m.micro_recall = (micro_tp + micro_fn) == 0
                         ? 0.0
                         : static_cast<double>(micro_tp) /
                               static_cast<double>(micro_tp + micro_fn);
    m.micro_f1 = f1_of(m.micro_precision, m.micro_recall);
    if (macro_categories > 0) {
        m.macro_precision = macro_p_sum / static_cast<double>(macro_categories);
        m.macro_recall = macro_r_sum / static_cast<double>(macro_categories);
        m.macro_f1 = f1_of(m.macro_precision, m.macro_recall);
    }
    return m;
}

std::vector<SweepPoint> threshold_sweep(const ScoredPredictions& preds,
                                        const std::vector<double>& grid) {
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (grid[i] <= grid[i - 1])
            throw UsageError("threshold_sweep: grid must be strictly increasing");
    std::vector<SweepPoint> curve;
    curve.reserve(grid.size());
    for (double threshold : grid) {
        PrfMetrics m = prf_at_threshold(preds, threshold);
        SweepPoint point;
        point.threshold = threshold;
        point.precision = m.micro_precision;
        point.recall = m.micro_recall;
        point.f1 = m.micro_f1;
        for (std::size_t i = 0; i < preds.scores.size(); ++i)
            point.predicted_tags += preds.scores.data[i] > threshold;
        curve.push_back(point);
    }
    return curve;
}

PrfMetrics eval_caption_as_tagger(
    const std::vector<std::pair<std::string, std::string>>& captions,
    const std::vector<corpus::ImageTagSet>& truth, const vocab::TagVocabulary& vocab) {
    // Parse, project and resolve each caption, then union per image.
    std::vector<std::pair<std::string, std::vector<int>>> parsed;
    parsed.reserve(captions.size());
    for (const auto& [image_id, text] : captions) {
        auto tags = semparse::project_tags(semparse::parse_caption(text));
        std::set<int> ids;
        auto resolve = [&](const std::vector<std::string>& list) {
            for (const auto& s : list)
                if (auto id = vocab.lookup(s)) ids.insert(*id);
        };
        resolve(tags.entities);
        resolve(tags.attributes);
        resolve(tags.actions);
        parsed.emplace_back(image_id, std::vector<int>(ids.begin(), ids.end()));
    }
    auto predicted = corpus::aggregate_image_tags(parsed);

    // Evaluate over the union of image ids; a missing side is an empty set.
    std::map<std::string, const std::vector<int>*> pred_by_image, truth_by_image;
    for (const auto& p : predicted) pred_by_image[p.image_id] = &p.tags;
    for (const auto& t : truth) truth_by_image[t.image_id] = &t.tags;
    std::set<std::string> all_images;
    for (const auto& [id, tags] : pred_by_image) all_images.insert(id);
    for (const auto& [id, tags] : truth_by_image) all_images.insert(id);

    ScoredPredictions preds;
    preds.scores = Matrix(all_images.size(), vocab.size(), 0.0);
    std::size_t row = 0;
    for (const auto& image_id : all_images) {
        preds.image_ids.push_back(image_id);
        auto p = pred_by_image.find(image_id);
        if (p != pred_by_image.end())
            for (int id : *p->second) preds.scores(row, id) = 1.0;
        auto t = truth_by_image.find(image_id);
        preds.truth.push_back(t == truth_by_image.end() ? std::vector<int>{} : *t->second);
        ++row;
    }
    return prf_at_threshold(preds, 0.5);
}

double recall_at_k(const std::vector<std::vector<std::string>>& ranked_ids,
                   const std::vector<std::vector<std::string>>& relevant, std::size_t k) {
    if (k < 1) throw UsageError("recall_at_k: k must be >= 1");
    if (ranked_ids.size() != relevant.size())
        throw UsageError("recall_at_k: one relevant set per query required");
    if (ranked_ids.empty()) throw UsageError("recall_at_k: no queries");
    std::size_t hits = 0;
    for (std::size_t q = 0; q < ranked_ids.size(); ++q) {
        std::unordered_set<std::string> rel(relevant[q].begin(), relevant[q].end());
        std::size_t limit = std::min(k, ranked_ids[q].size());
        for (std::size_t r = 0; r < limit; ++r) {
            if (rel.count(ranked_ids[q][r])) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(ranked_ids.size());
}

}  // namespace tagmine::evalkit
