// tagmine: corpus-to-tags pipeline driver. Subcommands are thin adapters over
// the library; data goes to --output (or stdout), progress and counts to
// stderr, so pipes compose. Exit codes: 0 success, 1 usage error, 2 data error.

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "tagmine/corpus.hpp"
#include "tagmine/errors.hpp"
#include "tagmine/evalkit.hpp"
#include "tagmine/gradcheck.hpp"
#include "tagmine/losskit.hpp"
#include "tagmine/rerank.hpp"
#include "tagmine/rng.hpp"
#include "tagmine/semparse.hpp"
#include "tagmine/tagger.hpp"
#include "tagmine/vocab.hpp"

namespace {

using tagmine::DataError;
using tagmine::UsageError;

tagmine::corpus::Shard parse_shard(const std::string& spec) {
    std::size_t slash = spec.find('/');
    if (slash == std::string::npos)
        throw UsageError("--shard expects I/N, got \"" + spec + "\"");
    try {
        std::size_t index = std::stoull(spec.substr(0, slash));
        std::size_t count = std::stoull(spec.substr(slash + 1));
        if (count == 0 || index >= count)
            throw UsageError("--shard index " + std::to_string(index) +
                             " out of range for count " + std::to_string(count));
        return {index, count};
    } catch (const UsageError&) {
        throw;
    } catch (const std::exception&) {
        throw UsageError("--shard expects I/N, got \"" + spec + "\"");
    }
}

std::vector<double> parse_sweep(const std::string& spec) {
    double start = 0.0, stop = 0.0, step = 0.0;
    if (std::sscanf(spec.c_str(), "%lf:%lf:%lf", &start, &stop, &step) != 3)
        throw UsageError("--sweep expects START:STOP:STEP, got \"" + spec + "\"");
    if (step <= 0.0 || stop < start)
        throw UsageError("--sweep needs a positive step and STOP >= START");
    std::vector<double> grid;
    for (int i = 0;; ++i) {
        double t = start + i * step;
        if (t > stop + 1e-12) break;
        grid.push_back(t);
    }
    return grid;
}

// Writes to the path when given, otherwise to stdout.
class OutputSink {
public:
    explicit OutputSink(const std::string& path) {
        if (!path.empty()) {
            file_.open(path, std::ios::binary);
            if (!file_) throw DataError("cannot write output file: " + path);
        }
    }
    std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }
    void finish() {
        if (file_.is_open()) {
            file_.flush();
            if (!file_) throw DataError("failed writing output file");
        } else {
            std::cout.flush();
        }
    }

private:
    std::ofstream file_;
};

std::size_t thread_cap() {
    if (const char* env = std::getenv("TAGMINE_THREADS")) {
        char* end = nullptr;
        unsigned long v = std::strtoul(env, &end, 10);
        if (end != env && v > 0) return v;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

void report_line_error(const tagmine::corpus::LineError& err) {
    std::cerr << "line " << err.line_number << ": " << err.message << "\n";
}

// --- parse ------------------------------------------------------------------

struct ParseArgs {
    std::string input, output, mode = "builtin", sidecar, vocab_path, shard = "0/1";
};

int run_parse(const ParseArgs& args) {
    auto shard = parse_shard(args.shard);
    std::optional<tagmine::semparse::SidecarIndex> sidecar;
    if (args.mode == "external") {
        if (args.sidecar.empty())
            throw UsageError("--mode external requires --sidecar");
        sidecar = tagmine::semparse::SidecarIndex::load(args.sidecar);
    }

    std::optional<tagmine::vocab::TagVocabulary> vocab;
    if (!args.vocab_path.empty())
        vocab = tagmine::vocab::TagVocabulary::load_tsv(args.vocab_path);

    OutputSink sink(args.output);
    std::size_t records = 0, errors = 0;
    std::vector<std::pair<std::string, std::vector<int>>> tagged;

    tagmine::corpus::for_each_record(
        args.input, shard,
        [&](std::size_t line_number, const tagmine::corpus::CaptionRecord& rec) {
            ++records;
            tagmine::semparse::ParseResult parse =
                sidecar ? sidecar->at(line_number)
                        : tagmine::semparse::parse_caption(rec.text);
            auto tags = tagmine::semparse::project_tags(parse);
            if (vocab) {
                std::set<int> ids;
                auto resolve = [&](const std::vector<std::string>& list) {
                    for (const auto& s : list)
                        if (auto id = vocab->lookup(s)) ids.insert(*id);
                };
                resolve(tags.entities);
                resolve(tags.attributes);
                resolve(tags.actions);
                tagged.emplace_back(rec.image_id, std::vector<int>(ids.begin(), ids.end()));
                return;
            }
            nlohmann::ordered_json obj;
            obj["image_id"] = rec.image_id;
            obj["line"] = line_number;
            obj["heads"] = parse.heads;
            auto modifiers = nlohmann::ordered_json::array();
            for (const auto& [m, h] : parse.modifiers) modifiers.push_back({m, h});
            obj["modifiers"] = modifiers;
            auto relations = nlohmann::ordered_json::array();
            for (const auto& r : parse.relations) relations.push_back({r[0], r[1], r[2]});
            obj["relations"] = relations;
            obj["entities"] = tags.entities;
            obj["attributes"] = tags.attributes;
            obj["actions"] = tags.actions;
            sink.stream() << obj.dump() << '\n';
        },
        [&](const tagmine::corpus::LineError& err) {
            ++errors;
            report_line_error(err);
        });

    if (vocab) {
        for (const auto& image : tagmine::corpus::aggregate_image_tags(tagged)) {
            nlohmann::ordered_json obj;
            obj["image_id"] = image.image_id;
            obj["tags"] = image.tags;
            sink.stream() << obj.dump() << '\n';
        }
    }
    sink.finish();
    std::cerr << "parsed " << records << " records, " << errors << " malformed\n";
    return 0;
}

// --- vocab build ------------------------------------------------------------

tagmine::semparse::ParsedTags tags_from_json(const nlohmann::json& obj,
                                             const std::string& where) {
    tagmine::semparse::ParsedTags tags;
    auto read = [&](const char* key, std::vector<std::string>& into) {
        if (!obj.contains(key)) return;
        if (!obj[key].is_array())
            throw DataError(where + ": \"" + key + "\" not an array");
        for (const auto& v : obj[key]) {
            if (!v.is_string()) throw DataError(where + ": non-string tag");
            into.push_back(v.get<std::string>());
        }
    };
    read("entities", tags.entities);
    read("attributes", tags.attributes);
    read("actions", tags.actions);
    return tags;
}

// Streams one shard of the input, which holds either parse records
// ("entities"/...) or raw caption records ("text", parsed on the fly).
void for_each_parsed(const std::string& path, tagmine::corpus::Shard shard,
                     const std::function<void(const std::string& image_id,
                                              const tagmine::semparse::ParsedTags&)>& fn,
                     std::size_t* error_count) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open input file: " + path);
    std::string line;
    std::size_t line_number = 0;
    for (; std::getline(in, line); ++line_number) {
        if (line_number % shard.count != shard.index) continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string where = path + ":" + std::to_string(line_number);
        nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) {
            if (error_count) ++*error_count;
            continue;
        }
        std::string image_id =
            obj.contains("image_id") && obj["image_id"].is_string()
                ? obj["image_id"].get<std::string>()
                : "";
        if (obj.contains("entities") || obj.contains("attributes") ||
            obj.contains("actions")) {
            fn(image_id, tags_from_json(obj, where));
        } else if (obj.contains("text") && obj["text"].is_string()) {
            fn(image_id, tagmine::semparse::project_tags(tagmine::semparse::parse_caption(
                             obj["text"].get<std::string>())));
        } else {
            if (error_count) ++*error_count;
        }
    }
}

struct VocabBuildArgs {
    std::string input, output, synonyms, allowlist, shard = "0/1";
    std::size_t top_k = 5000;
    std::uint64_t min_freq = 1;
};

int run_vocab_build(const VocabBuildArgs& args) {
    if (args.top_k < 1) throw UsageError("--top-k must be >= 1");
    auto shard = parse_shard(args.shard);
    // The shard count fans the counting out; partial maps merge by addition,
    // so the result is identical for any count.
    const std::size_t shards = shard.count;
    if (shards > 1)
        std::cerr << "counting over " << shards << " internal shards\n";

    std::vector<tagmine::vocab::FrequencyMaps> partial(shards);
    std::vector<std::size_t> errors(shards, 0);
    std::size_t workers = std::min(shards, thread_cap());
    std::vector<std::thread> pool;
    std::size_t next = 0;
    auto count_shard = [&](std::size_t index) {
        for_each_parsed(
            args.input, {index, shards},
            [&partial, index](const std::string&, const tagmine::semparse::ParsedTags& t) {
                partial[index].add(t);
            },
            &errors[index]);
    };
    if (workers <= 1) {
        for (std::size_t i = 0; i < shards; ++i) count_shard(i);
    } else {
        std::mutex mutex;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (;;) {
                    std::size_t index;
                    {
                        std::lock_guard<std::mutex> lock(mutex);
                        if (next >= shards) return;
                        index = next++;
                    }
                    count_shard(index);
                }
            });
        }
        for (auto& t : pool) t.join();
    }

    tagmine::vocab::FrequencyMaps merged;
    std::size_t total_errors = 0;
    for (std::size_t i = 0; i < shards; ++i) {
        merged.merge(partial[i]);
        total_errors += errors[i];
    }

    tagmine::vocab::SynonymTable synonyms;
    if (!args.synonyms.empty()) synonyms = tagmine::vocab::load_synonym_table(args.synonyms);
    tagmine::vocab::AllowDenyList filter;
    if (!args.allowlist.empty()) filter = tagmine::vocab::load_allow_deny(args.allowlist);

    auto vocab = tagmine::vocab::build_vocab(merged, args.top_k, synonyms, args.min_freq,
                                             filter);
    if (args.output.empty()) throw UsageError("vocab build requires --output");
    vocab.save_tsv(args.output);
    std::cerr << "vocabulary of " << vocab.size() << " categories ("
              << total_errors << " malformed lines skipped)\n";
    return 0;
}

// --- vocab overlap ----------------------------------------------------------

struct VocabOverlapArgs {
    std::string vocab_path, input, output;
};

int run_vocab_overlap(const VocabOverlapArgs& args) {
    auto vocab = tagmine::vocab::TagVocabulary::load_tsv(args.vocab_path);
    std::ifstream in(args.input, std::ios::binary);
    if (!in) throw DataError("cannot open category list: " + args.input);
    std::vector<std::string> external;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) external.push_back(line);
    }
    auto overlap = tagmine::vocab::vocab_overlap(vocab, external);
    OutputSink sink(args.output);
    sink.stream() << "overlap\t" << overlap.count << "\n";
    for (const auto& canonical : overlap.canonicals) sink.stream() << canonical << "\n";
    sink.finish();
    std::cerr << overlap.count << " of " << external.size()
              << " external categories overlap\n";
    return 0;
}

// --- stats --------------------------------------------------------------------

struct StatsArgs {
    std::string input, output, shard = "0/1";
};

int run_stats(const StatsArgs& args) {
    auto shard = parse_shard(args.shard);
    std::vector<std::pair<std::string, tagmine::semparse::ParsedTags>> parsed;
    std::size_t errors = 0;
    tagmine::corpus::for_each_record(
        args.input, shard,
        [&](std::size_t, const tagmine::corpus::CaptionRecord& rec) {
            parsed.emplace_back(rec.image_id, tagmine::semparse::project_tags(
                                                  tagmine::semparse::parse_caption(rec.text)));
        },
        [&](const tagmine::corpus::LineError& err) {
            ++errors;
            report_line_error(err);
        });
    auto stats = tagmine::vocab::corpus_stats(parsed);
    OutputSink sink(args.output);
    char buf[64];
    sink.stream() << "n_images\t" << stats.n_images << "\n";
    sink.stream() << "n_texts\t" << stats.n_texts << "\n";
    std::snprintf(buf, sizeof(buf), "%.2f", stats.avg_texts_per_image);
    sink.stream() << "avg_texts_per_image\t" << buf << "\n";
    sink.stream() << "n_tags\t" << stats.n_tags << "\n";
    std::snprintf(buf, sizeof(buf), "%.2f", stats.avg_tags_per_image);
    sink.stream() << "avg_tags_per_image\t" << buf << "\n";
    sink.finish();
    return 0;
}

// --- train / predict ----------------------------------------------------------

std::vector<tagmine::corpus::ImageTagSet> load_tag_sets(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open tag file: " + path);
    std::vector<tagmine::corpus::ImageTagSet> sets;
    std::string line;
    std::size_t line_no = 0;
    for (; std::getline(in, line); ++line_no) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::string where = path + ":" + std::to_string(line_no);
        nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object() || !obj.contains("image_id") ||
            !obj["image_id"].is_string() || !obj.contains("tags") || !obj["tags"].is_array())
            throw DataError(where + ": expected {\"image_id\", \"tags\"}");
        tagmine::corpus::ImageTagSet set;
        set.image_id = obj["image_id"].get<std::string>();
        for (const auto& t : obj["tags"]) {
            if (!t.is_number_integer()) throw DataError(where + ": non-integer tag id");
            set.tags.push_back(t.get<int>());
        }
        std::sort(set.tags.begin(), set.tags.end());
        set.tags.erase(std::unique(set.tags.begin(), set.tags.end()), set.tags.end());
        sets.push_back(std::move(set));
    }
    return sets;
}

struct TrainArgs {
    std::string input, labels, vocab_path, output;
    double gamma_pos = 0.0, gamma_neg = 4.0, lr = 0.1;
    std::size_t epochs = 10;
    std::uint64_t seed = 0;
};

int run_train(const TrainArgs& args) {
    if (args.lr <= 0.0) throw UsageError("--lr must be positive");
    auto features = tagmine::tagger::load_features(args.input);
    auto labels = load_tag_sets(args.labels);
    auto vocab = tagmine::vocab::TagVocabulary::load_tsv(args.vocab_path);
    std::vector<double> loss_log;
    tagmine::tagger::TrainConfig config;
    config.gamma_pos = args.gamma_pos;
    config.gamma_neg = args.gamma_neg;
    config.learning_rate = args.lr;
    config.epochs = args.epochs;
    config.seed = args.seed;
    config.loss_log = &loss_log;
    auto model = tagmine::tagger::train(features, labels, vocab, config);
    for (std::size_t e = 0; e < loss_log.size(); ++e)
        std::cerr << "epoch " << e << " loss " << loss_log[e] << "\n";
    if (args.output.empty()) throw UsageError("train requires --output");
    model.save_tsv(args.output);
    return 0;
}

struct PredictArgs {
    std::string input, model_path, output;
    std::optional<double> threshold;
};

int run_predict(const PredictArgs& args) {
    auto model = tagmine::tagger::LinearTagger::load_tsv(args.model_path);
    auto features = tagmine::tagger::load_features(args.input);
    OutputSink sink(args.output);
    for (const auto& rec : features) {
        auto probs = tagmine::tagger::predict_logits(model, rec.vector);
        nlohmann::ordered_json obj;
        obj["image_id"] = rec.image_id;
        if (args.threshold) {
            obj["tags"] = tagmine::tagger::threshold_tags(probs, *args.threshold);
        } else {
            obj["scores"] = probs;
        }
        sink.stream() << obj.dump() << '\n';
    }
    sink.finish();
    std::cerr << "scored " << features.size() << " images over " << model.num_classes()
              << " categories\n";
    return 0;
}

// --- eval -----------------------------------------------------------------------

// Predictions as either score vectors or binary tag sets.
struct LoadedPredictions {
    std::vector<std::string> image_ids;
    std::vector<std::vector<double>> scores;  // empty in binary mode
    std::vector<std::vector<int>> tags;       // empty in score mode
    bool binary = false;
};

LoadedPredictions load_predictions(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open predictions file: " + path);
    LoadedPredictions out;
    std::string line;
    std::size_t line_no = 0;
    for (; std::getline(in, line); ++line_no) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::string where = path + ":" + std::to_string(line_no);
        nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object() || !obj.contains("image_id") ||
            !obj["image_id"].is_string())
            throw DataError(where + ": expected {\"image_id\", \"scores\"|\"tags\"}");
        bool has_scores = obj.contains("scores") && obj["scores"].is_array();
        bool has_tags = obj.contains("tags") && obj["tags"].is_array();
        if (!has_scores && !has_tags)
            throw DataError(where + ": record needs \"scores\" or \"tags\"");
        if (out.image_ids.empty()) out.binary = !has_scores;
        if (out.binary != !has_scores)
            throw DataError(where + ": cannot mix score and tag records");
        out.image_ids.push_back(obj["image_id"].get<std::string>());
        if (has_scores && !out.binary) {
            std::vector<double> row;
            for (const auto& v : obj["scores"]) {
                if (!v.is_number()) throw DataError(where + ": non-numeric score");
                row.push_back(v.get<double>());
            }
            if (!out.scores.empty() && row.size() != out.scores.front().size())
                throw DataError(where + ": inconsistent score vector length");
            out.scores.push_back(std::move(row));
        } else {
            std::vector<int> ids;
            for (const auto& v : obj["tags"]) {
                if (!v.is_number_integer()) throw DataError(where + ": non-integer tag id");
                ids.push_back(v.get<int>());
            }
            out.tags.push_back(std::move(ids));
        }
    }
    if (out.image_ids.empty()) throw DataError(path + ": no prediction records");
    return out;
}

tagmine::evalkit::ScoredPredictions assemble_predictions(const LoadedPredictions& preds,
                                                         const std::string& truth_path,
                                                         std::size_t category_count) {
    auto truth_sets = load_tag_sets(truth_path);
    std::map<std::string, const std::vector<int>*> truth_by_image;
    for (const auto& t : truth_sets) truth_by_image[t.image_id] = &t.tags;

    std::size_t categories = category_count;
    if (categories == 0) {
        if (!preds.binary) {
            categories = preds.scores.front().size();
        } else {
            int max_id = -1;
            for (const auto& ids : preds.tags)
                for (int id : ids) max_id = std::max(max_id, id);
            for (const auto& t : truth_sets)
                for (int id : t.tags) max_id = std::max(max_id, id);
            categories = static_cast<std::size_t>(max_id + 1);
        }
    }
    if (categories == 0) throw DataError("cannot determine category count");

    tagmine::evalkit::ScoredPredictions out;
    out.image_ids = preds.image_ids;
    out.scores = tagmine::Matrix(preds.image_ids.size(), categories, 0.0);
    for (std::size_t i = 0; i < preds.image_ids.size(); ++i) {
        if (!preds.binary) {
            for (std::size_t c = 0; c < categories; ++c)
                out.scores(i, c) = preds.scores[i][c];
        } else {
            for (int id : preds.tags[i]) {
                if (id < 0 || static_cast<std::size_t>(id) >= categories)
                    throw DataError("prediction tag id out of range: " + std::to_string(id));
                out.scores(i, id) = 1.0;
            }
        }
        auto t = truth_by_image.find(preds.image_ids[i]);
        if (t == truth_by_image.end())
            throw DataError("no truth record for image " + preds.image_ids[i]);
        out.truth.push_back(*t->second);
    }
    return out;
}

void print_prf(std::ostream& os, const tagmine::evalkit::PrfMetrics& m) {
    char buf[64];
    auto row = [&](const char* name, double value) {
        std::snprintf(buf, sizeof(buf), "%.6f", value);
        os << name << '\t' << buf << '\n';
    };
    row("micro_precision", m.micro_precision);
    row("micro_recall", m.micro_recall);
    row("micro_f1", m.micro_f1);
    row("macro_precision", m.macro_precision);
    row("macro_recall", m.macro_recall);
    row("macro_f1", m.macro_f1);
}

struct EvalTaggingArgs {
    std::string input, truth, vocab_path, output;
    double threshold = 0.5;
};

int run_eval_tagging(const EvalTaggingArgs& args) {
    std::size_t categories = 0;
    if (!args.vocab_path.empty())
        categories = tagmine::vocab::TagVocabulary::load_tsv(args.vocab_path).size();
    auto loaded = load_predictions(args.input);
    auto preds = assemble_predictions(loaded, args.truth, categories);
    OutputSink sink(args.output);
    char buf[64];
    if (!loaded.binary) {
        double map = tagmine::evalkit::mean_ap(preds);
        std::snprintf(buf, sizeof(buf), "%.6f", map);
        sink.stream() << "mAP\t" << buf << '\n';
    }
    double threshold = loaded.binary ? 0.5 : args.threshold;
    print_prf(sink.stream(), tagmine::evalkit::prf_at_threshold(preds, threshold));
    sink.finish();
    return 0;
}

struct EvalCaptionArgs {
    std::string input, truth, vocab_path, output, shard = "0/1";
};

int run_eval_caption(const EvalCaptionArgs& args) {
    auto vocab = tagmine::vocab::TagVocabulary::load_tsv(args.vocab_path);
    auto truth = load_tag_sets(args.truth);
    std::vector<std::pair<std::string, std::string>> captions;
    tagmine::corpus::for_each_record(
        args.input, parse_shard(args.shard),
        [&](std::size_t, const tagmine::corpus::CaptionRecord& rec) {
            captions.emplace_back(rec.image_id, rec.text);
        },
        report_line_error);
    auto metrics = tagmine::evalkit::eval_caption_as_tagger(captions, truth, vocab);
    OutputSink sink(args.output);
    print_prf(sink.stream(), metrics);
    sink.finish();
    return 0;
}

struct EvalSweepArgs {
    std::string input, truth, vocab_path, output, sweep = "0.1:0.9:0.1";
};

int run_eval_sweep(const EvalSweepArgs& args) {
    std::size_t categories = 0;
    if (!args.vocab_path.empty())
        categories = tagmine::vocab::TagVocabulary::load_tsv(args.vocab_path).size();
    auto loaded = load_predictions(args.input);
    if (loaded.binary)
        throw DataError("eval sweep needs score predictions, not binary tags");
    auto preds = assemble_predictions(loaded, args.truth, categories);
    auto curve = tagmine::evalkit::threshold_sweep(preds, parse_sweep(args.sweep));
    OutputSink sink(args.output);
    sink.stream() << "threshold\tprecision\trecall\tf1\tpredicted_tags\n";
    char buf[160];
    for (const auto& p : curve) {
        std::snprintf(buf, sizeof(buf), "%.3f\t%.6f\t%.6f\t%.6f\t%llu\n", p.threshold,
                      p.precision, p.recall, p.f1,
                      static_cast<unsigned long long>(p.predicted_tags));
        sink.stream() << buf;
    }
    sink.finish();
    return 0;
}

// --- rerank / search --------------------------------------------------------------

std::vector<double> load_embedding_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open embedding file: " + path);
    nlohmann::json obj;
    try {
        in >> obj;
    } catch (const std::exception&) {
        throw DataError(path + ": malformed embedding JSON");
    }
    if (!obj.is_object() || !obj.contains("vector") || !obj["vector"].is_array())
        throw DataError(path + ": expected {\"vector\": [numbers]}");
    std::vector<double> vec;
    for (const auto& v : obj["vector"]) {
        if (!v.is_number()) throw DataError(path + ": non-numeric vector entry");
        vec.push_back(v.get<double>());
    }
    return vec;
}

std::set<int> tags_from_text(const std::string& text,
                             const tagmine::vocab::TagVocabulary& vocab) {
    auto tags = tagmine::semparse::project_tags(tagmine::semparse::parse_caption(text));
    std::set<int> ids;
    auto resolve = [&](const std::vector<std::string>& list) {
        for (const auto& s : list)
            if (auto id = vocab.lookup(s)) ids.insert(*id);
    };
    resolve(tags.entities);
    resolve(tags.attributes);
    resolve(tags.actions);
    return ids;
}

void print_ranked(std::ostream& os, const tagmine::rerank::RankedList& ranked) {
    os << "rank\tid\tscore\n";
    char buf[64];
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.6f", ranked[i].score);
        os << (i + 1) << '\t' << ranked[i].id << '\t' << buf << '\n';
    }
}

struct RerankArgs {
    std::string gallery, text, embedding, vocab_path, output;
    double alpha = 0.8;
    std::size_t top_k = 10;
};

int run_rerank(const RerankArgs& args) {
    auto gallery = tagmine::rerank::load_gallery(args.gallery);
    tagmine::rerank::Query query;
    if (!args.embedding.empty()) query.embedding = load_embedding_file(args.embedding);
    if (args.alpha > 0.0 && query.embedding.empty())
        throw UsageError("--alpha > 0 requires --embedding (use --alpha 0 for tag-only)");
    if (!args.text.empty()) {
        if (args.vocab_path.empty())
            throw UsageError("--text requires --vocab to resolve tags");
        query.tags = tags_from_text(args.text,
                                    tagmine::vocab::TagVocabulary::load_tsv(args.vocab_path));
        std::cerr << "query resolved to " << query.tags.size() << " tags\n";
    }
    auto ranked = tagmine::rerank::rerank(query, gallery, args.alpha, args.top_k);
    OutputSink sink(args.output);
    print_ranked(sink.stream(), ranked);
    sink.finish();
    return 0;
}

struct SearchArgs {
    std::string gallery, keywords, vocab_path, output;
    std::size_t top_k = 10;
};

int run_search(const SearchArgs& args) {
    auto gallery = tagmine::rerank::load_gallery(args.gallery);
    std::optional<tagmine::vocab::TagVocabulary> vocab;
    if (!args.vocab_path.empty())
        vocab = tagmine::vocab::TagVocabulary::load_tsv(args.vocab_path);
    std::set<int> keywords;
    std::string current;
    auto flush = [&]() {
        if (current.empty()) return;
        bool numeric = std::all_of(current.begin(), current.end(), [](unsigned char c) {
            return std::isdigit(c) != 0;
        });
        if (numeric) {
            keywords.insert(std::stoi(current));
        } else if (vocab) {
            if (auto id = vocab->lookup(current)) keywords.insert(*id);
            else std::cerr << "keyword not in vocabulary: " << current << "\n";
        } else {
            throw UsageError("non-numeric keywords require --vocab");
        }
        current.clear();
    };
    for (char c : args.keywords) {
        if (c == ',') flush();
        else current.push_back(c);
    }
    flush();
    if (keywords.empty()) throw DataError("no keywords resolved");
    auto ranked = tagmine::rerank::keyword_search(keywords, gallery, args.top_k);
    OutputSink sink(args.output);
    print_ranked(sink.stream(), ranked);
    sink.finish();
    return 0;
}

// --- gradcheck / shuffle ---------------------------------------------------------

struct GradcheckArgs {
    std::string loss = "all", output;
    std::uint64_t seed = 0;
};

int run_gradcheck_cmd(const GradcheckArgs& args) {
    std::vector<std::string> kernels;
    if (args.loss == "all") kernels = {"bce", "asl", "lm", "itc", "itm"};
    else kernels = {args.loss};
    auto reports = tagmine::gradcheck::run_gradcheck(kernels, args.seed);
    OutputSink sink(args.output);
    sink.stream() << tagmine::gradcheck::format_report(reports);
    sink.finish();
    for (const auto& r : reports)
        if (!r.pass) throw DataError("gradient check failed for kernel " + r.kernel);
    return 0;
}

struct ShuffleArgs {
    std::string input, output;
    std::uint64_t seed = 0;
};

int run_shuffle(const ShuffleArgs& args) {
    std::ifstream in(args.input, std::ios::binary);
    if (!in) throw DataError("cannot open input file: " + args.input);
    OutputSink sink(args.output);
    std::string line;
    std::size_t line_no = 0;
    for (; std::getline(in, line); ++line_no) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::string where = args.input + ":" + std::to_string(line_no);
        nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object() || !obj.contains("tags") ||
            !obj["tags"].is_array())
            throw DataError(where + ": expected a record with a \"tags\" array");
        // Per-record seed offset by line number keeps records independent.
        std::uint64_t record_seed = args.seed + line_no;
        const auto& arr = obj["tags"];
        bool all_int = std::all_of(arr.begin(), arr.end(),
                                   [](const nlohmann::json& v) { return v.is_number_integer(); });
        nlohmann::ordered_json out_obj;
        if (obj.contains("image_id")) out_obj["image_id"] = obj["image_id"];
        if (all_int) {
            std::vector<int> tags = arr.get<std::vector<int>>();
            out_obj["tags"] = tagmine::corpus::shuffle_tags(std::move(tags), record_seed);
        } else {
            std::vector<std::string> tags;
            for (const auto& v : arr) {
                if (!v.is_string()) throw DataError(where + ": tags must be ints or strings");
                tags.push_back(v.get<std::string>());
            }
            out_obj["tags"] = tagmine::corpus::shuffle_tags(std::move(tags), record_seed);
        }
        sink.stream() << out_obj.dump() << '\n';
    }
    sink.finish();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"corpus-to-tags toolkit: caption parsing, tag vocabularies, loss "
                 "kernels, tagging evaluation and tag-guided retrieval"};
    app.require_subcommand(1);

    ParseArgs parse_args;
    auto* cmd_parse = app.add_subcommand("parse", "parse captions into tags");
    cmd_parse->add_option("--input", parse_args.input, "caption JSONL")->required();
    cmd_parse->add_option("--output", parse_args.output, "output file (default stdout)");
    cmd_parse->add_option("--mode", parse_args.mode, "builtin|external")
        ->check(CLI::IsMember({"builtin", "external"}));
    cmd_parse->add_option("--sidecar", parse_args.sidecar, "external parse sidecar JSONL");
    cmd_parse->add_option("--vocab", parse_args.vocab_path,
                          "emit per-image tag-id sets against this vocabulary");
    cmd_parse->add_option("--shard", parse_args.shard, "I/N: process shard I of N");

    auto* cmd_vocab = app.add_subcommand("vocab", "tag vocabulary operations");
    cmd_vocab->require_subcommand(1);
    VocabBuildArgs vb_args;
    auto* cmd_vb = cmd_vocab->add_subcommand("build", "build a vocabulary from parsed tags");
    cmd_vb->add_option("--input", vb_args.input, "parsed or caption JSONL")->required();
    cmd_vb->add_option("--output", vb_args.output, "vocabulary TSV")->required();
    cmd_vb->add_option("--synonyms", vb_args.synonyms, "surface\\tcanonical TSV");
    cmd_vb->add_option("--allowlist", vb_args.allowlist, "allow/deny list file");
    cmd_vb->add_option("--top-k", vb_args.top_k, "keep the top K categories");
    cmd_vb->add_option("--min-freq", vb_args.min_freq, "minimum folded frequency");
    cmd_vb->add_option("--shard", vb_args.shard, "I/N: count over N internal shards");

    VocabOverlapArgs vo_args;
    auto* cmd_vo = cmd_vocab->add_subcommand("overlap",
                                             "overlap with an external category list");
    cmd_vo->add_option("--vocab", vo_args.vocab_path, "vocabulary TSV")->required();
    cmd_vo->add_option("--input", vo_args.input, "external list, one category per line")
        ->required();
    cmd_vo->add_option("--output", vo_args.output, "output file (default stdout)");

    StatsArgs stats_args;
    auto* cmd_stats = app.add_subcommand("stats", "corpus statistics");
    cmd_stats->add_option("--input", stats_args.input, "caption JSONL")->required();
    cmd_stats->add_option("--output", stats_args.output, "output file (default stdout)");
    cmd_stats->add_option("--shard", stats_args.shard, "I/N: process shard I of N");

    TrainArgs train_args;
    auto* cmd_train = app.add_subcommand("train", "train the linear tagger");
    cmd_train->add_option("--input", train_args.input, "feature JSONL")->required();
    cmd_train->add_option("--labels", train_args.labels, "per-image tag-id JSONL")
        ->required();
    cmd_train->add_option("--vocab", train_args.vocab_path, "vocabulary TSV")->required();
    cmd_train->add_option("--output", train_args.output, "model TSV")->required();
    cmd_train->add_option("--gamma-pos", train_args.gamma_pos, "positive focusing");
    cmd_train->add_option("--gamma-neg", train_args.gamma_neg, "negative focusing");
    cmd_train->add_option("--lr", train_args.lr, "learning rate");
    cmd_train->add_option("--epochs", train_args.epochs, "training epochs");
    cmd_train->add_option("--seed", train_args.seed, "RNG seed");

    PredictArgs predict_args;
    double predict_threshold = -1.0;
    auto* cmd_predict = app.add_subcommand("predict", "score features with a model");
    cmd_predict->add_option("--input", predict_args.input, "feature JSONL")->required();
    cmd_predict->add_option("--model", predict_args.model_path, "model TSV")->required();
    cmd_predict->add_option("--output", predict_args.output, "output file (default stdout)");
    auto* thr_opt = cmd_predict->add_option("--threshold", predict_threshold,
                                            "emit tag ids above this threshold");

    auto* cmd_eval = app.add_subcommand("eval", "evaluation protocols");
    cmd_eval->require_subcommand(1);
    EvalTaggingArgs et_args;
    auto* cmd_et = cmd_eval->add_subcommand("tagging", "mAP and P/R/F1 of predictions");
    cmd_et->add_option("--input", et_args.input, "predictions JSONL")->required();
    cmd_et->add_option("--truth", et_args.truth, "truth tag-id JSONL")->required();
    cmd_et->add_option("--vocab", et_args.vocab_path, "vocabulary TSV fixing C");
    cmd_et->add_option("--threshold", et_args.threshold, "decision threshold");
    cmd_et->add_option("--output", et_args.output, "output file (default stdout)");

    EvalCaptionArgs ec_args;
    auto* cmd_ec = cmd_eval->add_subcommand("caption", "caption-as-tagger evaluation");
    cmd_ec->add_option("--input", ec_args.input, "caption JSONL")->required();
    cmd_ec->add_option("--truth", ec_args.truth, "truth tag-id JSONL")->required();
    cmd_ec->add_option("--vocab", ec_args.vocab_path, "vocabulary TSV")->required();
    cmd_ec->add_option("--output", ec_args.output, "output file (default stdout)");
    cmd_ec->add_option("--shard", ec_args.shard, "I/N: process shard I of N");

    EvalSweepArgs es_args;
    auto* cmd_es = cmd_eval->add_subcommand("sweep", "precision/recall threshold sweep");
    cmd_es->add_option("--input", es_args.input, "score predictions JSONL")->required();
    cmd_es->add_option("--truth", es_args.truth, "truth tag-id JSONL")->required();
    cmd_es->add_option("--vocab", es_args.vocab_path, "vocabulary TSV fixing C");
    cmd_es->add_option("--sweep", es_args.sweep, "START:STOP:STEP threshold grid");
    cmd_es->add_option("--output", es_args.output, "output file (default stdout)");

    RerankArgs rerank_args;
    auto* cmd_rerank = app.add_subcommand("rerank", "tag-guided retrieval reranking");
    cmd_rerank->add_option("--gallery", rerank_args.gallery, "gallery JSONL")->required();
    cmd_rerank->add_option("--text", rerank_args.text, "query text, parsed to tags");
    cmd_rerank->add_option("--embedding", rerank_args.embedding,
                           "query embedding JSON {\"vector\": [...]}");
    cmd_rerank->add_option("--vocab", rerank_args.vocab_path, "vocabulary TSV");
    cmd_rerank->add_option("--alpha", rerank_args.alpha, "cosine weight in [0,1]")
        ->check(CLI::Range(0.0, 1.0));
    cmd_rerank->add_option("--topk", rerank_args.top_k, "results to return");
    cmd_rerank->add_option("--output", rerank_args.output, "output file (default stdout)");

    SearchArgs search_args;
    auto* cmd_search = app.add_subcommand("search", "keyword (tag set) search");
    cmd_search->add_option("--gallery", search_args.gallery, "gallery JSONL")->required();
    cmd_search->add_option("--keywords", search_args.keywords,
                           "comma-separated keywords or tag ids")
        ->required();
    cmd_search->add_option("--vocab", search_args.vocab_path, "vocabulary TSV");
    cmd_search->add_option("--topk", search_args.top_k, "results to return");
    cmd_search->add_option("--output", search_args.output, "output file (default stdout)");

    GradcheckArgs gc_args;
    auto* cmd_gc = app.add_subcommand("gradcheck", "finite-difference gradient checks");
    cmd_gc->add_option("--loss", gc_args.loss, "bce|asl|lm|itc|itm|all")
        ->check(CLI::IsMember({"bce", "asl", "lm", "itc", "itm", "all"}));
    cmd_gc->add_option("--seed", gc_args.seed, "RNG seed");
    cmd_gc->add_option("--output", gc_args.output, "output file (default stdout)");

    ShuffleArgs shuffle_args;
    auto* cmd_shuffle = app.add_subcommand("shuffle", "rearrange per-record tag lists");
    cmd_shuffle->add_option("--input", shuffle_args.input, "tag JSONL")->required();
    cmd_shuffle->add_option("--output", shuffle_args.output,
                            "output file (default stdout)");
    cmd_shuffle->add_option("--seed", shuffle_args.seed, "RNG seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (cmd_parse->parsed()) return run_parse(parse_args);
        if (cmd_vb->parsed()) return run_vocab_build(vb_args);
        if (cmd_vo->parsed()) return run_vocab_overlap(vo_args);
        if (cmd_stats->parsed()) return run_stats(stats_args);
        if (cmd_train->parsed()) return run_train(train_args);
        if (cmd_predict->parsed()) {
            if (thr_opt->count() > 0) predict_args.threshold = predict_threshold;
            return run_predict(predict_args);
        }
        if (cmd_et->parsed()) return run_eval_tagging(et_args);
        if (cmd_ec->parsed()) return run_eval_caption(ec_args);
        if (cmd_es->parsed()) return run_eval_sweep(es_args);
        if (cmd_rerank->parsed()) return run_rerank(rerank_args);
        if (cmd_search->parsed()) return run_search(search_args);
        if (cmd_gc->parsed()) return run_gradcheck_cmd(gc_args);
        if (cmd_shuffle->parsed()) return run_shuffle(shuffle_args);
        std::cerr << "no subcommand given\n";
        return 1;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
