#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <numeric>

#include "tagmine/errors.hpp"
#include "tagmine/evalkit.hpp"
#include "tagmine/rng.hpp"
#include "tagmine/vocab.hpp"

using namespace tagmine;

#include "support/oracles.hpp"

using testsupport::brute_force_ap;

namespace {

evalkit::ScoredPredictions three_by_two() {
    evalkit::ScoredPredictions preds;
    preds.image_ids = {"img0", "img1", "img2"};
    preds.scores = Matrix(3, 2);
    preds.scores(0, 0) = 0.9; preds.scores(0, 1) = 0.2;
    preds.scores(1, 0) = 0.6; preds.scores(1, 1) = 0.7;
    preds.scores(2, 0) = 0.4; preds.scores(2, 1) = 0.8;
    preds.truth = {{0}, {1}, {0, 1}};
    return preds;
}

}  // namespace

TEST_CASE("average_precision on the worked instances") {
    CHECK(*evalkit::average_precision({0.9, 0.8, 0.7}, {1, 1, 1}) == doctest::Approx(1.0));
    // ranking [0,1,2]; positives at ranks 1 and 3: (1 + 2/3) / 2
    CHECK(*evalkit::average_precision({0.9, 0.8, 0.1}, {1, 0, 1}) ==
          doctest::Approx((1.0 + 2.0 / 3.0) / 2.0).epsilon(1e-12));
    CHECK(*evalkit::average_precision({0.9, 0.8, 0.1}, {1, 0, 1}) ==
          doctest::Approx(0.8333).epsilon(1e-4));
    // all-equal scores: the index tiebreak ranks image 0 first
    CHECK(*evalkit::average_precision({0.5, 0.5}, {1, 0}) == doctest::Approx(1.0));
    CHECK_FALSE(evalkit::average_precision({0.5, 0.5}, {0, 0}).has_value());
}

TEST_CASE("mean_ap averages defined categories") {
    // category 0 ranks perfectly, category 1 at AP 0.5
    evalkit::ScoredPredictions preds;
    preds.image_ids = {"a", "b"};
    preds.scores = Matrix(2, 2);
    preds.scores(0, 0) = 0.9; preds.scores(0, 1) = 0.9;
    preds.scores(1, 0) = 0.1; preds.scores(1, 1) = 0.1;
    preds.truth = {{0}, {1}};
    CHECK(evalkit::mean_ap(preds) == doctest::Approx(0.75));

    evalkit::ScoredPredictions single;
    single.image_ids = {"a", "b", "c"};
    single.scores = Matrix(3, 1);
    single.scores(0, 0) = 0.9; single.scores(1, 0) = 0.8; single.scores(2, 0) = 0.1;
    single.truth = {{0}, {}, {0}};
    CHECK(evalkit::mean_ap(single) ==
          doctest::Approx(*evalkit::average_precision({0.9, 0.8, 0.1}, {1, 0, 1})));

    evalkit::ScoredPredictions empty;
    empty.image_ids = {"a"};
    empty.scores = Matrix(1, 2, 0.5);
    empty.truth = {{}};
    CHECK_THROWS_AS(evalkit::mean_ap(empty), UsageError);
}

TEST_CASE("a category subset restricts evaluation to overlapping categories") {
    evalkit::ScoredPredictions preds;
    preds.image_ids = {"a", "b"};
    preds.scores = Matrix(2, 2);
    preds.scores(0, 0) = 0.9; preds.scores(0, 1) = 0.9;
    preds.scores(1, 0) = 0.1; preds.scores(1, 1) = 0.1;
    preds.truth = {{0}, {1}};  // category 0 perfect, category 1 at AP 0.5
    std::vector<int> only_first = {0};
    CHECK(evalkit::mean_ap(preds, &only_first) == doctest::Approx(1.0));
    std::vector<int> only_second = {1};
    CHECK(evalkit::mean_ap(preds, &only_second) == doctest::Approx(0.5));

    // unrestricted, category 1 contributes one FP and one FN
    auto full = evalkit::prf_at_threshold(preds, 0.5);
    CHECK(full.micro_precision == doctest::Approx(0.5));
    CHECK(full.micro_recall == doctest::Approx(0.5));
    // restricted to category 0, predictions are perfect
    auto m = evalkit::prf_at_threshold(preds, 0.5, &only_first);
    CHECK(m.micro_recall == doctest::Approx(1.0));
    CHECK(m.micro_precision == doctest::Approx(1.0));

    std::vector<int> bad = {7};
    CHECK_THROWS_AS(evalkit::mean_ap(preds, &bad), UsageError);
}

TEST_CASE("mean_ap equals the brute-force oracle on random tied instances") {
    Rng rng = make_rng(321);
    const double score_pool[] = {0.1, 0.25, 0.25, 0.5, 0.5, 0.5, 0.8, 0.9};
    int evaluated = 0;
    for (int instance = 0; instance < 1200; ++instance) {
        std::size_t images = 1 + uniform_below(rng, 8);
        std::size_t categories = 1 + uniform_below(rng, 3);
        evalkit::ScoredPredictions preds;
        preds.scores = Matrix(images, categories);
        for (std::size_t i = 0; i < images; ++i) {
            preds.image_ids.push_back("i" + std::to_string(i));
            std::vector<int> truth;
            for (std::size_t c = 0; c < categories; ++c) {
                preds.scores(i, c) = score_pool[uniform_below(rng, 8)];
                if (uniform01(rng) < 0.4) truth.push_back(static_cast<int>(c));
            }
            preds.truth.push_back(truth);
        }
        double expected = 0.0;
        std::size_t defined = 0;
        for (std::size_t c = 0; c < categories; ++c) {
            std::vector<double> scores(images);
            std::vector<int> truth(images, 0);
            for (std::size_t i = 0; i < images; ++i) {
                scores[i] = preds.scores(i, c);
                for (int t : preds.truth[i])
                    if (t == static_cast<int>(c)) truth[i] = 1;
            }
            if (std::none_of(truth.begin(), truth.end(), [](int t) { return t != 0; }))
                continue;
            expected += brute_force_ap(scores, truth);
            ++defined;
        }
        if (defined == 0) continue;
        ++evaluated;
        CHECK(evalkit::mean_ap(preds) ==
              doctest::Approx(expected / defined).epsilon(1e-14));
    }
    CHECK(evaluated >= 1000);
}

TEST_CASE("prf on the hand-counted 3x2 instance") {
    auto m = evalkit::prf_at_threshold(three_by_two(), 0.5);
    // cat0: TP {img0}, FP {img1}, FN {img2}; cat1: TP {img1, img2}
    CHECK(m.micro_precision == doctest::Approx(0.75));
    CHECK(m.micro_recall == doctest::Approx(0.75));
    CHECK(m.micro_f1 == doctest::Approx(0.75));
    CHECK(m.macro_precision == doctest::Approx(0.75));
    CHECK(m.macro_recall == doctest::Approx(0.75));
    CHECK(m.macro_f1 == doctest::Approx(0.75));
}

TEST_CASE("prf at perfect predictions is all ones") {
    evalkit::ScoredPredictions preds;
    preds.image_ids = {"a", "b"};
    preds.scores = Matrix(2, 2);
    preds.scores(0, 0) = 0.9;
    preds.scores(1, 1) = 0.9;
    preds.truth = {{0}, {1}};
    auto m = evalkit::prf_at_threshold(preds, 0.5);
    CHECK(m.micro_precision == 1.0);
    CHECK(m.micro_recall == 1.0);
    CHECK(m.micro_f1 == 1.0);
    CHECK(m.macro_f1 == 1.0);
}

TEST_CASE("predicting everything saturates recall at the positive rate") {
    evalkit::ScoredPredictions preds;
    preds.image_ids = {"a", "b", "c"};
    preds.scores = Matrix(3, 4, 0.99);
    preds.truth = {{0}, {1, 2}, {}};
    auto m = evalkit::prf_at_threshold(preds, 0.5);
    CHECK(m.micro_recall == 1.0);
    CHECK(m.micro_precision == doctest::Approx(3.0 / 12.0));
}

TEST_CASE("prf metrics stay in range and micro f1 lies between micro p and r") {
    Rng rng = make_rng(99);
    for (int instance = 0; instance < 200; ++instance) {
        std::size_t images = 1 + uniform_below(rng, 6);
        std::size_t categories = 1 + uniform_below(rng, 4);
        evalkit::ScoredPredictions preds;
        preds.scores = Matrix(images, categories);
        for (std::size_t i = 0; i < images; ++i) {
            preds.image_ids.push_back(std::to_string(i));
            std::vector<int> truth;
            for (std::size_t c = 0; c < categories; ++c) {
                preds.scores(i, c) = uniform01(rng);
                if (uniform01(rng) < 0.3) truth.push_back(static_cast<int>(c));
            }
            preds.truth.push_back(truth);
        }
        auto m = evalkit::prf_at_threshold(preds, 0.5);
        for (double value : {m.micro_precision, m.micro_recall, m.micro_f1,
                             m.macro_precision, m.macro_recall, m.macro_f1}) {
            CHECK(value >= 0.0);
            CHECK(value <= 1.0);
        }
        CHECK(m.micro_f1 >= std::min(m.micro_precision, m.micro_recall) - 1e-12);
        CHECK(m.micro_f1 <= std::max(m.micro_precision, m.micro_recall) + 1e-12);
    }
}

TEST_CASE("threshold_sweep recall is monotone non-increasing") {
    auto preds = three_by_two();
    auto curve = evalkit::threshold_sweep(preds, {0.3, 0.5, 0.7});
    REQUIRE(curve.size() == 3);
    CHECK(curve[0].recall >= curve[1].recall);
    CHECK(curve[1].recall >= curve[2].recall);
    CHECK(curve[0].predicted_tags >= curve[2].predicted_tags);

    auto single = evalkit::threshold_sweep(preds, {0.5});
    auto direct = evalkit::prf_at_threshold(preds, 0.5);
    CHECK(single[0].precision == direct.micro_precision);
    CHECK(single[0].recall == direct.micro_recall);
    CHECK(single[0].f1 == direct.micro_f1);

    CHECK_THROWS_AS(evalkit::threshold_sweep(preds, {0.5, 0.5}), UsageError);
}

TEST_CASE("threshold_sweep on a known score distribution") {
    // one image, four categories scored 0.2 0.4 0.6 0.8, truth {2, 3}
    evalkit::ScoredPredictions preds;
    preds.image_ids = {"a"};
    preds.scores = Matrix(1, 4);
    for (std::size_t c = 0; c < 4; ++c) preds.scores(0, c) = 0.2 * (c + 1);
    preds.truth = {{2, 3}};
    auto curve = evalkit::threshold_sweep(preds, {0.1, 0.3, 0.5, 0.7});
    // hand-computed: predictions per threshold: 4, 3, 2, 1 cells
    CHECK(curve[0].predicted_tags == 4);
    CHECK(curve[0].precision == doctest::Approx(0.5));
    CHECK(curve[0].recall == doctest::Approx(1.0));
    CHECK(curve[1].predicted_tags == 3);
    CHECK(curve[1].precision == doctest::Approx(2.0 / 3.0));
    CHECK(curve[1].recall == doctest::Approx(1.0));
    CHECK(curve[2].predicted_tags == 2);
    CHECK(curve[2].precision == doctest::Approx(1.0));
    CHECK(curve[2].recall == doctest::Approx(1.0));
    CHECK(curve[3].predicted_tags == 1);
    CHECK(curve[3].precision == doctest::Approx(1.0));
    CHECK(curve[3].recall == doctest::Approx(0.5));
}

namespace {

vocab::TagVocabulary caption_vocab() {
    vocab::FrequencyMaps freqs;
    freqs.entities = {{"dog", 50}, {"cat", 40}, {"beach", 30}, {"tree", 20}};
    freqs.actions = {{"run", 10}};
    return vocab::build_vocab(freqs, 5);
}

}  // namespace

TEST_CASE("caption-as-tagger evaluation on exact and empty captions") {
    auto v = caption_vocab();
    // ids: dog=0, cat=1, beach=2, tree=3, run=4
    std::vector<corpus::ImageTagSet> truth = {{"i1", {0, 2, 4}}};
    auto exact = evalkit::eval_caption_as_tagger(
        {{"i1", "a dog running on the beach"}}, truth, v);
    CHECK(exact.micro_precision == 1.0);
    CHECK(exact.micro_recall == 1.0);
    CHECK(exact.micro_f1 == 1.0);

    auto empty = evalkit::eval_caption_as_tagger({{"i1", ""}}, truth, v);
    CHECK(empty.micro_recall == 0.0);
}

TEST_CASE("caption-as-tagger on a five-caption fixture matches hand counts") {
    auto v = caption_vocab();
    // parsed tags: a -> {dog, beach, run}, a -> {cat}, b -> {tree}, b -> {dog},
    // c -> {} ; unions: a {0,1,2,4}, b {0,3}, c {}
    std::vector<std::pair<std::string, std::string>> captions = {
        {"a", "a dog running on the beach"},
        {"a", "a cat"},
        {"b", "a tree"},
        {"b", "a dog"},
        {"c", "blurry photo"},
    };
    std::vector<corpus::ImageTagSet> truth = {
        {"a", {0, 2}},   // predicted {0,1,2,4}: TP 2, FP 2
        {"b", {0, 1}},   // predicted {0,3}:     TP 1, FP 1, FN 1
        {"c", {4}},      // predicted {}:        FN 1
    };
    auto m = evalkit::eval_caption_as_tagger(captions, truth, v);
    // micro: TP=3, FP=3, FN=2
    CHECK(m.micro_precision == doctest::Approx(3.0 / 6.0));
    CHECK(m.micro_recall == doctest::Approx(3.0 / 5.0));
    // macro over the categories with positives {dog, cat, beach, run}:
    // dog P=1 R=1, cat P=0 R=0, beach P=1 R=1, run P=0 R=0
    CHECK(m.macro_precision == doctest::Approx(0.5));
    CHECK(m.macro_recall == doctest::Approx(0.5));
}

TEST_CASE("recall_at_k boundary behavior") {
    std::vector<std::vector<std::string>> ranked = {
        {"r1", "x", "x", "x", "x", "x"},
        {"x1", "x2", "x3", "x4", "x5", "r2"},
    };
    std::vector<std::vector<std::string>> relevant = {{"r1"}, {"r2"}};
    CHECK(evalkit::recall_at_k(ranked, relevant, 1) == doctest::Approx(0.5));
    CHECK(evalkit::recall_at_k(ranked, relevant, 5) == doctest::Approx(0.5));
    CHECK(evalkit::recall_at_k(ranked, relevant, 10) == doctest::Approx(1.0));
}

TEST_CASE("recall_at_k on a four-query fixture") {
    std::vector<std::vector<std::string>> ranked = {
        {"a", "b", "c"},   // relevant a at rank 1
        {"b", "a", "c"},   // relevant a at rank 2
        {"b", "c", "a"},   // relevant a at rank 3
        {"b", "c", "d"},   // relevant missing
    };
    std::vector<std::vector<std::string>> relevant(4, {"a"});
    CHECK(evalkit::recall_at_k(ranked, relevant, 1) == doctest::Approx(0.25));
    CHECK(evalkit::recall_at_k(ranked, relevant, 2) == doctest::Approx(0.5));
    CHECK(evalkit::recall_at_k(ranked, relevant, 3) == doctest::Approx(0.75));
    // non-decreasing in k
    double previous = 0.0;
    for (std::size_t k = 1; k <= 5; ++k) {
        double r = evalkit::recall_at_k(ranked, relevant, k);
        CHECK(r >= previous);
        previous = r;
    }
}
