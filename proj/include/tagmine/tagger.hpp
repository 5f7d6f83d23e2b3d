#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tagmine/corpus.hpp"
#include "tagmine/matrix.hpp"
#include "tagmine/vocab.hpp"

namespace tagmine::tagger {

struct FeatureRecord {
    std::string image_id;
    std::vector<double> vector;
};

std::vector<FeatureRecord> load_features(const std::string& path);
void save_features(const std::string& path, const std::vector<FeatureRecord>& records);

// Multi-label linear probe: per-class scores sigmoid(W x + b). vocab_hash
// binds the model to the vocabulary it was trained against.
struct LinearTagger {
    Matrix weights;               // C x d
    std::vector<double> bias;     // C
    std::uint64_t vocab_hash = 0;

    std::size_t num_classes() const { return weights.rows; }
    std::size_t dim() const { return weights.cols; }

    void save_tsv(const std::string& path) const;
    static LinearTagger load_tsv(const std::string& path);
};

struct TrainConfig {
    double gamma_pos = 0.0;
    double gamma_neg = 4.0;
    double learning_rate = 0.1;
    std::size_t epochs = 10;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    // per-epoch mean training loss, appended during training
    std::vector<double>* loss_log = nullptr;
};

// Seeded init (weights uniform in +-1/sqrt(d), bias zero), then minibatch SGD
// on the asymmetric loss through the sigmoid link. Example order is a seeded
// shuffle per epoch; everything is bit-reproducible for a fixed seed.
LinearTagger train(const std::vector<FeatureRecord>& features,
                   const std::vector<corpus::ImageTagSet>& labels,
                   const vocab::TagVocabulary& vocab, const TrainConfig& config);

// sigmoid(W x + b), entries in (0, 1).
std::vector<double> predict_logits(const LinearTagger& model,
                                   const std::vector<double>& feature);

// Ids with probability strictly above the threshold, sorted ascending.
std::vector<int> threshold_tags(const std::vector<double>& probs, double threshold);

}  // namespace tagmine::tagger
