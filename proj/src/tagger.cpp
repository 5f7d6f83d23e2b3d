#include "tagmine/tagger.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "json.hpp"

#include "tagmine/errors.hpp"
#include "tagmine/losskit.hpp"
#include "tagmine/rng.hpp"

namespace tagmine::tagger {

std::vector<FeatureRecord> load_features(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open feature file: " + path);
    std::vector<FeatureRecord> records;
    std::string line;
    std::size_t line_no = 0;
    std::size_t dim = 0;
    for (; std::getline(in, line); ++line_no) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::string where = path + ":" + std::to_string(line_no);
        nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object() || !obj.contains("image_id") ||
            !obj["image_id"].is_string() || !obj.contains("vector") ||
            !obj["vector"].is_array())
            throw DataError(where + ": expected {\"image_id\", \"vector\"}");
        FeatureRecord rec;
        rec.image_id = obj["image_id"].get<std::string>();
        for (const auto& v : obj["vector"]) {
            if (!v.is_number()) throw DataError(where + ": non-numeric vector entry");
            double x = v.get<double>();
            if (!std::isfinite(x)) throw DataError(where + ": non-finite vector entry");
            rec.vector.push_back(x);
        }
        if (records.empty()) dim = rec.vector.size();
        else if (rec.vector.size() != dim)
            throw DataError(where + ": inconsistent feature dimension");
        records.push_back(std::move(rec));
    }
    return records;
}

void save_features(const std::string& path, const std::vector<FeatureRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write feature file: " + path);
    for (const auto& rec : records) {
        nlohmann::ordered_json obj;
        obj["image_id"] = rec.image_id;
        obj["vector"] = rec.vector;
        out << obj.dump() << '\n';
    }
}

void LinearTagger::save_tsv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write model file: " + path);
    char buf[64];
    out << "classes\t" << weights.rows << "\tdim\t" << weights.cols << "\tvocab_hash\t";
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(vocab_hash));
    out << buf << '\n';
    for (std::size_t c = 0; c < weights.rows; ++c) {
        std::snprintf(buf, sizeof(buf), "%.17g", bias[c]);
        out << buf;
        for (std::size_t j = 0; j < weights.cols; ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", weights(c, j));
            out << '\t' << buf;
        }
        out << '\n';
    }
    if (!out) throw DataError("failed writing model file: " + path);
}

LinearTagger LinearTagger::load_tsv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file: " + path);
    std::string header;
    if (!std::getline(in, header)) throw DataError(path + ": empty model file");
    std::size_t classes = 0, dim = 0;
    unsigned long long hash = 0;
    if (std::sscanf(header.c_str(), "classes\t%zu\tdim\t%zu\tvocab_hash\t%llx", &classes,
                    &dim, &hash) != 3)
        throw DataError(path + ": malformed model header");
    LinearTagger model;
    model.weights = Matrix(classes, dim);
    model.bias.resize(classes);
    model.vocab_hash = hash;
    std::string line;
    for (std::size_t c = 0; c < classes; ++c) {
        if (!std::getline(in, line)) throw DataError(path + ": truncated model file");
        const char* p = line.c_str();
        char* end = nullptr;
        model.bias[c] = std::strtod(p, &end);
        if (end == p) throw DataError(path + ": bad bias value");
        p = end;
        for (std::size_t j = 0; j < dim; ++j) {
            model.weights(c, j) = std::strtod(p, &end);
            if (end == p) throw DataError(path + ": bad weight value");
            p = end;
        }
    }
    return model;
}

namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace

LinearTagger train(const std::vector<FeatureRecord>& features,
                   const std::vector<corpus::ImageTagSet>& labels,
                   const vocab::TagVocabulary& vocab, const TrainConfig& config) {
    const std::size_t classes = vocab.size();
    if (classes == 0) throw UsageError("train: empty vocabulary");
    if (features.empty()) throw DataError("train: no feature records");
    const std::size_t dim = features.front().vector.size();
    if (dim == 0) throw DataError("train: zero-dimensional features");

    // Join on image_id and validate before touching any weights.
    std::unordered_map<std::string, const corpus::ImageTagSet*> by_image;
    for (const auto& l : labels) {
        for (int id : l.tags)
            if (id < 0 || static_cast<std::size_t>(id) >= classes)
                throw DataError("train: tag id " + std::to_string(id) +
                                " outside vocabulary of size " + std::to_string(classes));
        by_image[l.image_id] = &l;
    }
    std::vector<const corpus::ImageTagSet*> joined;
    joined.reserve(features.size());
    for (const auto& f : features) {
        if (f.vector.size() != dim) throw DataError("train: inconsistent feature dimension");
        auto it = by_image.find(f.image_id);
        if (it == by_image.end())
            throw DataError("train: no label record for image " + f.image_id);
        joined.push_back(it->second);
    }

    Rng rng = make_rng(config.seed);
    LinearTagger model;
    model.vocab_hash = vocab.hash();
    model.weights = Matrix(classes, dim);
    model.bias.assign(classes, 0.0);
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    for (double& w : model.weights.data) w = (2.0 * uniform01(rng) - 1.0) * bound;

    const std::size_t n = features.size();
    const std::size_t batch_size = std::max<std::size_t>(1, config.batch_size);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i)
            std::swap(order[i - 1], order[uniform_below(rng, i)]);

        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += batch_size) {
            std::size_t count = std::min(batch_size, n - start);
            Matrix batch_labels(count, classes, 0.0);
            Matrix batch_probs(count, classes);
            for (std::size_t b = 0; b < count; ++b) {
                std::size_t idx = order[start + b];
                for (int id : joined[idx]->tags) batch_labels(b, id) = 1.0;
                const auto& x = features[idx].vector;
                for (std::size_t c = 0; c < classes; ++c) {
                    double z = model.bias[c];
                    for (std::size_t j = 0; j < dim; ++j) z += model.weights(c, j) * x[j];
                    batch_probs(b, c) = sigmoid(z);
                }
            }
            auto asl = losskit::asl_loss(batch_labels, batch_probs, config.gamma_pos,
                                         config.gamma_neg);
            epoch_loss += asl.loss;
            ++batches;
            // Chain through the sigmoid: dL/dz = dL/dp . p (1 - p).
            for (std::size_t b = 0; b < count; ++b) {
                std::size_t idx = order[start + b];
                const auto& x = features[idx].vector;
                for (std::size_t c = 0; c < classes; ++c) {
                    double p = batch_probs(b, c);
                    double dz = asl.grad(b, c) * p * (1.0 - p);
                    if (dz == 0.0) continue;
                    double step = config.learning_rate * dz;
                    model.bias[c] -= step;
                    for (std::size_t j = 0; j < dim; ++j)
                        model.weights(c, j) -= step * x[j];
                }
            }
        }
        if (config.loss_log) config.loss_log->push_back(epoch_loss / batches);
    }
    return model;
}

std::vector<double> predict_logits(const LinearTagger& model,
                                   const std::vector<double>& feature) {
    if (feature.size() != model.dim())
        throw DataError("predict: feature dimension " + std::to_string(feature.size()) +
                        " does not match model dimension " + std::to_string(model.dim()));
    std::vector<double> probs(model.num_classes());
    for (std::size_t c = 0; c < model.num_classes(); ++c) {
        double z = model.bias[c];
        for (std::size_t j = 0; j < model.dim(); ++j)
            z += model.weights(c, j) * feature[j];
        probs[c] = sigmoid(z);
    }
    return probs;
}

std::vector<int> threshold_tags(const std::vector<double>& probs, double threshold) {
    std::vector<int> ids;
    for (std::size_t c = 0; c < probs.size(); ++c)
        if (probs[c] > threshold) ids.push_back(static_cast<int>(c));
    return ids;
}

}  // namespace tagmine::tagger
