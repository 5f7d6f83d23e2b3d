// Acceptance suite: runs every acceptance criterion end to end against the
// built CLI and library, printing one pass/fail line per criterion. Exits
// nonzero if any criterion fails. Usage: acceptance [path-to-tagmine-cli]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "tagmine/corpus.hpp"
#include "tagmine/evalkit.hpp"
#include "tagmine/losskit.hpp"
#include "tagmine/rerank.hpp"
#include "tagmine/rng.hpp"
#include "tagmine/semparse.hpp"
#include "tagmine/vocab.hpp"

#include "support/finitediff.hpp"
#include "support/oracles.hpp"
#include "support/proc.hpp"
#include "support/synthetic.hpp"
#include "support/tempdir.hpp"

using namespace tagmine;
using testsupport::read_file;
using testsupport::run_cli;
using testsupport::TempDir;

namespace {

struct Criterion {
    std::string label;
    double budget_seconds;
    std::function<bool(std::string& detail)> run;
};

// ---------------------------------------------------------------------------
// 1. Paper-example fidelity through the CLI.
bool check_parse_fidelity(std::string& detail) {
    TempDir dir;
    auto input = dir.write(
        "captions.jsonl",
        R"({"image_id": "demo", "text": "A red alarm clock is on a wooden desk"})" "\n");
    auto result = run_cli("parse --input " + input + " 2>/dev/null");
    if (result.exit_code != 0) {
        detail = "parse exited " + std::to_string(result.exit_code);
        return false;
    }
    auto obj = nlohmann::json::parse(result.output.substr(0, result.output.find('\n')));
    bool ok = obj["heads"] == nlohmann::json({"alarm clock", "desk"}) &&
              obj["attributes"] == nlohmann::json({"red", "wooden"}) &&
              obj["actions"] == nlohmann::json({"on"});
    detail = ok ? "heads {alarm clock, desk}, modifiers {red, wooden}, relations {on}"
                : "got " + obj.dump();
    return ok;
}

// ---------------------------------------------------------------------------
// 2. Gradient suite: >=100 randomized finite-difference instances per kernel
// at 1e-4 relative error; ASL at zero focusing equals BCE within 1e-12.
bool check_gradients(std::string& detail) {
    const std::size_t instances = 100;
    const double tolerance = 1e-4;
    double worst = 0.0;
    std::string worst_kernel;

    auto note = [&](const char* kernel, double err) {
        if (err > worst) {
            worst = err;
            worst_kernel = kernel;
        }
    };

    Rng rng = make_rng(20240601);
    auto random_labels = [&](std::size_t r, std::size_t c) {
        Matrix labels(r, c);
        bool any = false;
        for (double& v : labels.data) {
            double u = uniform01(rng);
            if (u < 0.15) {
                v = losskit::kIgnoreLabel;
            } else {
                v = u < 0.55 ? 0.0 : 1.0;
                any = true;
            }
        }
        if (!any) labels.data[0] = 1.0;
        return labels;
    };
    auto random_probs = [&](std::size_t r, std::size_t c) {
        Matrix probs(r, c);
        for (double& v : probs.data) v = 0.05 + 0.9 * uniform01(rng);
        return probs;
    };

    for (std::size_t i = 0; i < instances; ++i) {
        Matrix labels = random_labels(3, 4);
        Matrix probs = random_probs(3, 4);
        auto r = losskit::bce_loss(labels, probs);
        note("bce", testsupport::max_fd_error(probs.data, r.grad.data, [&] {
                 return losskit::bce_loss(labels, probs).loss;
             }));
    }
    for (std::size_t i = 0; i < instances; ++i) {
        Matrix labels = random_labels(4, 6);
        Matrix probs = random_probs(4, 6);
        double gp = (i % 3 == 0) ? 0.0 : 2.0 * uniform01(rng);
        double gn = 4.0 * uniform01(rng);
        auto r = losskit::asl_loss(labels, probs, gp, gn);
        note("asl", testsupport::max_fd_error(probs.data, r.grad.data, [&] {
                 return losskit::asl_loss(labels, probs, gp, gn).loss;
             }));
    }
    for (std::size_t i = 0; i < instances; ++i) {
        Matrix logits(5, 7);
        for (double& v : logits.data) v = 4.0 * uniform01(rng) - 2.0;
        std::vector<int> targets(5);
        bool any = false;
        for (auto& t : targets) {
            if (uniform01(rng) < 0.2) {
                t = losskit::kPadToken;
            } else {
                t = static_cast<int>(uniform_below(rng, 7));
                any = true;
            }
        }
        if (!any) targets[0] = 0;
        auto r = losskit::lm_loss(logits, targets);
        note("lm", testsupport::max_fd_error(logits.data, r.grad.data, [&] {
                 return losskit::lm_loss(logits, targets).loss;
             }));
    }
    for (std::size_t i = 0; i < instances; ++i) {
        Matrix image(4, 8), text(4, 8);
        for (double& v : image.data) v = normal01(rng);
        for (double& v : text.data) v = normal01(rng);
        double temperature = 0.07 + 0.4 * uniform01(rng);
        auto r = losskit::itc_loss(image, text, temperature);
        note("itc", testsupport::max_fd_error(image.data, r.grad_image.data, [&] {
                 return losskit::itc_loss(image, text, temperature).loss;
             }));
        note("itc", testsupport::max_fd_error(text.data, r.grad_text.data, [&] {
                 return losskit::itc_loss(image, text, temperature).loss;
             }));
    }
    for (std::size_t i = 0; i < instances; ++i) {
        std::vector<double> probs(10);
        std::vector<int> labels(10);
        for (auto& p : probs) p = 0.05 + 0.9 * uniform01(rng);
        for (auto& y : labels) y = uniform01(rng) < 0.5 ? 0 : 1;
        auto r = losskit::itm_loss(probs, labels);
        note("itm", testsupport::max_fd_error(probs, r.grad, [&] {
                 return losskit::itm_loss(probs, labels).loss;
             }));
    }

    double asl_vs_bce = 0.0;
    for (std::size_t i = 0; i < 50; ++i) {
        Matrix labels = random_labels(4, 5);
        Matrix probs = random_probs(4, 5);
        double delta = std::fabs(losskit::asl_loss(labels, probs, 0.0, 0.0).loss -
                                 losskit::bce_loss(labels, probs).loss);
        asl_vs_bce = std::max(asl_vs_bce, delta);
    }

    std::ostringstream oss;
    oss << "max FD rel error " << worst << " (" << worst_kernel << "), |asl-bce| "
        << asl_vs_bce;
    detail = oss.str();
    return worst < tolerance && asl_vs_bce <= 1e-12;
}

// ---------------------------------------------------------------------------
// 3. mean_ap equals the brute-force precision@k-by-definition oracle exactly
// on >=1000 random small instances including tied scores.
bool check_map_oracle(std::string& detail) {
    Rng rng = make_rng(77077);
    const double score_pool[] = {0.1, 0.25, 0.25, 0.5, 0.5, 0.5, 0.8, 0.9};
    std::size_t evaluated = 0;
    double worst = 0.0;
    for (int instance = 0; instance < 1400 || evaluated < 1000; ++instance) {
        if (instance > 5000) break;
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
            bool has_positive = false;
            for (int t : truth) has_positive |= (t != 0);
            if (!has_positive) continue;
            expected += testsupport::brute_force_ap(scores, truth);
            ++defined;
        }
        if (defined == 0) continue;
        ++evaluated;
        worst = std::max(worst,
                         std::fabs(evalkit::mean_ap(preds) - expected / defined));
    }
    std::ostringstream oss;
    oss << evaluated << " instances, max |difference| " << worst;
    detail = oss.str();
    return evaluated >= 1000 && worst <= 1e-12;
}

// ---------------------------------------------------------------------------
// Shared state between criteria 4 and 5: the synthetic demo pipeline.
struct DemoArtifacts {
    TempDir dir;
    std::string vocab_path, model_path, test_scores, test_truth;
    bool built = false;
    double trained_map = 0.0, untrained_map = 0.0;
    std::string failure;
};

DemoArtifacts& demo() {
    static DemoArtifacts artifacts;
    return artifacts;
}

double map_from_eval(const std::string& output) {
    std::istringstream iss(output);
    std::string line;
    while (std::getline(iss, line)) {
        if (line.rfind("mAP\t", 0) == 0) return std::stod(line.substr(4));
    }
    return -1.0;
}

// 4. Annotation-free supervision demo over the CLI: captions -> vocabulary ->
// parsed labels -> ASL-trained linear tagger -> held-out mAP >= 0.95, versus
// near-chance for the untrained model; deterministic per seed.
bool check_supervision_demo(std::string& detail) {
    auto& art = demo();
    const std::size_t train_images = 2000, test_images = 500, dim = 64;
    auto data = testsupport::make_tag_feature_corpus(train_images + test_images, dim,
                                                     0.1, 424242);

    std::string train_captions, test_captions, train_features, test_features;
    for (std::size_t i = 0; i < data.features.size(); ++i) {
        nlohmann::ordered_json caption;
        caption["image_id"] = data.features[i].image_id;
        caption["text"] = data.captions[i];
        nlohmann::ordered_json feature;
        feature["image_id"] = data.features[i].image_id;
        feature["vector"] = data.features[i].vector;
        if (i < train_images) {
            train_captions += caption.dump() + "\n";
            train_features += feature.dump() + "\n";
        } else {
            test_captions += caption.dump() + "\n";
            test_features += feature.dump() + "\n";
        }
    }
    auto& dir = art.dir;
    auto train_cap_path = dir.write("train_captions.jsonl", train_captions);
    auto test_cap_path = dir.write("test_captions.jsonl", test_captions);
    auto train_feat_path = dir.write("train_features.jsonl", train_features);
    auto test_feat_path = dir.write("test_features.jsonl", test_features);
    art.vocab_path = dir.file("vocab.tsv");
    art.model_path = dir.file("model.tsv");
    auto labels_path = dir.file("train_labels.jsonl");
    art.test_truth = dir.file("test_truth.jsonl");
    art.test_scores = dir.file("test_scores.jsonl");

    auto step = [&](const std::string& cmd) {
        auto r = run_cli(cmd + " 2>/dev/null");
        if (r.exit_code != 0) {
            art.failure = "command failed (" + std::to_string(r.exit_code) + "): " + cmd;
            return false;
        }
        return true;
    };
    if (!step("vocab build --input " + train_cap_path + " --output " + art.vocab_path +
              " --top-k 32"))
        return false;
    if (!step("parse --input " + train_cap_path + " --vocab " + art.vocab_path +
              " --output " + labels_path))
        return false;
    if (!step("parse --input " + test_cap_path + " --vocab " + art.vocab_path +
              " --output " + art.test_truth))
        return false;
    if (!step("train --input " + train_feat_path + " --labels " + labels_path +
              " --vocab " + art.vocab_path + " --output " + art.model_path +
              " --gamma-pos 0 --gamma-neg 4 --lr 0.5 --epochs 12 --seed 7"))
        return false;

    // determinism: retraining with the same seed is byte-identical
    auto model_again = dir.file("model_again.tsv");
    if (!step("train --input " + train_feat_path + " --labels " + labels_path +
              " --vocab " + art.vocab_path + " --output " + model_again +
              " --gamma-pos 0 --gamma-neg 4 --lr 0.5 --epochs 12 --seed 7"))
        return false;
    if (read_file(art.model_path) != read_file(model_again)) {
        detail = "retraining with the same seed changed the model file";
        return false;
    }

    if (!step("predict --input " + test_feat_path + " --model " + art.model_path +
              " --output " + art.test_scores))
        return false;
    auto trained_eval = run_cli("eval tagging --input " + art.test_scores + " --truth " +
                                art.test_truth + " 2>/dev/null");
    if (trained_eval.exit_code != 0) {
        detail = "eval tagging failed";
        return false;
    }
    art.trained_map = map_from_eval(trained_eval.output);

    // untrained baseline: zero epochs, same seed
    auto untrained_model = dir.file("untrained.tsv");
    auto untrained_scores = dir.file("untrained_scores.jsonl");
    if (!step("train --input " + train_feat_path + " --labels " + labels_path +
              " --vocab " + art.vocab_path + " --output " + untrained_model +
              " --epochs 0 --seed 7"))
        return false;
    if (!step("predict --input " + test_feat_path + " --model " + untrained_model +
              " --output " + untrained_scores))
        return false;
    auto untrained_eval = run_cli("eval tagging --input " + untrained_scores +
                                  " --truth " + art.test_truth + " 2>/dev/null");
    art.untrained_map = map_from_eval(untrained_eval.output);

    art.built = true;
    std::ostringstream oss;
    oss << "held-out mAP " << art.trained_map << " (untrained " << art.untrained_map
        << ")";
    detail = oss.str();
    return art.trained_map >= 0.95 && art.untrained_map < 0.5;
}

// ---------------------------------------------------------------------------
// 5. Threshold controllability: recall monotone non-increasing over the
// 0.1..0.9 sweep and strictly fewer predicted tags at 0.9 than at 0.1.
bool check_threshold_control(std::string& detail) {
    auto& art = demo();
    if (!art.built) {
        detail = "skipped: supervision demo artifacts unavailable (" + art.failure + ")";
        return false;
    }
    auto sweep = run_cli("eval sweep --input " + art.test_scores + " --truth " +
                         art.test_truth + " --sweep 0.1:0.9:0.1 2>/dev/null");
    if (sweep.exit_code != 0) {
        detail = "eval sweep failed";
        return false;
    }
    std::istringstream iss(sweep.output);
    std::string header;
    std::getline(iss, header);
    std::vector<double> recalls;
    std::vector<unsigned long long> predicted;
    double threshold, precision, recall, f1;
    unsigned long long tags;
    std::string line;
    while (std::getline(iss, line)) {
        if (std::sscanf(line.c_str(), "%lf\t%lf\t%lf\t%lf\t%llu", &threshold, &precision,
                        &recall, &f1, &tags) == 5) {
            recalls.push_back(recall);
            predicted.push_back(tags);
        }
    }
    if (recalls.size() != 9) {
        detail = "expected 9 sweep rows, got " + std::to_string(recalls.size());
        return false;
    }
    bool monotone = true;
    for (std::size_t i = 1; i < recalls.size(); ++i)
        monotone &= (recalls[i] <= recalls[i - 1] + 1e-12);
    bool fewer = predicted.back() < predicted.front();
    std::ostringstream oss;
    oss << "recall " << recalls.front() << " -> " << recalls.back() << ", predicted tags "
        << predicted.front() << " -> " << predicted.back();
    detail = oss.str();
    return monotone && fewer;
}

// ---------------------------------------------------------------------------
// 6. Tag-guided retrieval: on 100 seeded trials (100 queries x 1000 items),
// R@1 at alpha 0.8 beats or matches the alpha 1 cosine baseline in >=95%.
bool check_retrieval_property(std::string& detail) {
    const int trials = 100;
    int not_worse = 0;
    double gain_sum = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
        auto t = testsupport::make_retrieval_trial(100, 1000, 16, 1.2, 5000 + trial);
        std::vector<std::vector<std::string>> cosine_top(t.queries.size());
        std::vector<std::vector<std::string>> blend_top(t.queries.size());
        std::vector<std::vector<std::string>> relevant(t.queries.size());
        for (std::size_t q = 0; q < t.queries.size(); ++q) {
            cosine_top[q] = {rerank::rerank(t.queries[q], t.gallery, 1.0, 1)[0].id};
            blend_top[q] = {rerank::rerank(t.queries[q], t.gallery, 0.8, 1)[0].id};
            relevant[q] = {t.relevant_ids[q]};
        }
        double r1_cosine = evalkit::recall_at_k(cosine_top, relevant, 1);
        double r1_blend = evalkit::recall_at_k(blend_top, relevant, 1);
        if (r1_blend >= r1_cosine) ++not_worse;
        gain_sum += r1_blend - r1_cosine;
    }
    std::ostringstream oss;
    oss << not_worse << "/" << trials << " trials not worse, mean R@1 gain "
        << gain_sum / trials;
    detail = oss.str();
    return not_worse >= 95;
}

// ---------------------------------------------------------------------------
// 7. Determinism under parallelism: vocab build over 1, 2 and 8 shards is
// byte-identical on a 50k-caption synthetic corpus.
bool check_shard_determinism(std::string& detail) {
    TempDir dir;
    const auto& nouns = testsupport::tag_nouns();
    const char* adjectives[] = {"red", "small", "old", "wooden", "bright", "muddy"};
    const char* verbs[] = {"running", "sitting", "standing", "jumping"};
    Rng rng = make_rng(31337);
    std::string corpus;
    corpus.reserve(4 << 20);
    for (int i = 0; i < 50000; ++i) {
        std::string text = "a ";
        if (uniform01(rng) < 0.5) text += std::string(adjectives[uniform_below(rng, 6)]) + " ";
        text += nouns[uniform_below(rng, nouns.size())];
        if (uniform01(rng) < 0.4)
            text += " " + std::string(verbs[uniform_below(rng, 4)]) + " on a " +
                    nouns[uniform_below(rng, nouns.size())];
        nlohmann::ordered_json obj;
        obj["image_id"] = "img" + std::to_string(i / 5);
        obj["text"] = text;
        corpus += obj.dump() + "\n";
    }
    auto corpus_path = dir.write("captions.jsonl", corpus);

    std::vector<std::string> outputs;
    for (int shards : {1, 2, 8}) {
        auto out = dir.file("vocab_" + std::to_string(shards) + ".tsv");
        auto r = run_cli("vocab build --input " + corpus_path + " --output " + out +
                         " --top-k 100 --shard 0/" + std::to_string(shards) +
                         " 2>/dev/null");
        if (r.exit_code != 0) {
            detail = "vocab build failed over " + std::to_string(shards) + " shards";
            return false;
        }
        outputs.push_back(read_file(out));
    }
    bool identical = outputs[0] == outputs[1] && outputs[1] == outputs[2];
    detail = identical ? "1, 2 and 8 shards produced byte-identical vocabularies"
                       : "shard outputs differ";
    return identical;
}

// ---------------------------------------------------------------------------
// 8. Paper-scale benchmark numbers are documented as out of scope; the
// optional overlap fixture runs only when the released category list is
// supplied via TAGMINE_T2T_LIST.
bool check_out_of_scope(std::string& detail) {
    const char* fixture = std::getenv("TAGMINE_T2T_LIST");
    if (!fixture) {
        detail = "benchmark-scale numbers substituted by property suites; "
                 "overlap fixture skipped (set TAGMINE_T2T_LIST to run it)";
        return true;
    }
    // The released category list, one canonical per line, against the 91 COCO
    // object categories; the published overlap count is 73.
    static const std::vector<std::string> coco91 = {
        "person", "bicycle", "car", "motorcycle", "airplane", "bus", "train",
        "truck", "boat", "traffic light", "fire hydrant", "street sign",
        "stop sign", "parking meter", "bench", "bird", "cat", "dog", "horse",
        "sheep", "cow", "elephant", "bear", "zebra", "giraffe", "hat",
        "backpack", "umbrella", "shoe", "eye glasses", "handbag", "tie",
        "suitcase", "frisbee", "skis", "snowboard", "sports ball", "kite",
        "baseball bat", "baseball glove", "skateboard", "surfboard",
        "tennis racket", "bottle", "plate", "wine glass", "cup", "fork",
        "knife", "spoon", "bowl", "banana", "apple", "sandwich", "orange",
        "broccoli", "carrot", "hot dog", "pizza", "donut", "cake", "chair",
        "couch", "potted plant", "bed", "mirror", "dining table", "window",
        "desk", "toilet", "door", "tv", "laptop", "mouse", "remote",
        "keyboard", "cell phone", "microwave", "oven", "toaster", "sink",
        "refrigerator", "blender", "book", "clock", "vase", "scissors",
        "teddy bear", "hair drier", "toothbrush"};

    std::ifstream in(fixture);
    if (!in) {
        detail = std::string("cannot open TAGMINE_T2T_LIST: ") + fixture;
        return false;
    }
    vocab::FrequencyMaps freqs;
    std::string line;
    std::uint64_t rank = 1u << 20;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) freqs.entities[semparse::normalize_tag(line)] = rank--;
    }
    auto v = vocab::build_vocab(freqs, freqs.entities.size());
    auto overlap = vocab_overlap(v, coco91);
    std::ostringstream oss;
    oss << "COCO overlap " << overlap.count << " (published: 73)";
    detail = oss.str();
    return overlap.count == 73;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1) setenv("TAGMINE_CLI", argv[1], 1);

    std::vector<Criterion> criteria = {
        {"paper-example parse fidelity", 1.0, check_parse_fidelity},
        {"finite-difference gradient suite", 30.0, check_gradients},
        {"mAP brute-force oracle equivalence", 30.0, check_map_oracle},
        {"annotation-free supervision demo", 60.0, check_supervision_demo},
        {"threshold controllability", 60.0, check_threshold_control},
        {"tag-guided retrieval property", 60.0, check_retrieval_property},
        {"determinism under parallelism", 60.0, check_shard_determinism},
        {"paper-scale numbers out of scope", 60.0, check_out_of_scope},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        auto start = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = false;
        try {
            ok = criteria[i].run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                .count();
        bool in_budget = elapsed < criteria[i].budget_seconds;
        if (!in_budget)
            detail += " [over budget " + std::to_string(criteria[i].budget_seconds) + "s]";
        bool pass = ok && in_budget;
        failures += !pass;
        std::printf("criterion %zu (%s): %s (%.2f s) %s\n", i + 1,
                    criteria[i].label.c_str(), pass ? "PASS" : "FAIL", elapsed,
                    detail.c_str());
        std::fflush(stdout);
    }
    std::printf("RESULT: %zu/%zu criteria pass\n", criteria.size() - failures,
                criteria.size());
    return failures == 0 ? 0 : 1;
}
