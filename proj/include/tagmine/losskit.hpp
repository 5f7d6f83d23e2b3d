#pragma once

#include <cstdint>
#include <vector>

#include "tagmine/matrix.hpp"

namespace tagmine::losskit {

// Labels are 0, 1 or kIgnoreLabel; ignored cells contribute nothing to loss or
// gradient. Probabilities are clamped into [kProbEpsilon, 1 - kProbEpsilon] on
// ingestion, which keeps every log finite and the golden values stable.
inline constexpr double kIgnoreLabel = -1.0;
inline constexpr double kProbEpsilon = 1e-8;
inline constexpr int kPadToken = -1;

double clamp_prob(double p);
Matrix clamp_probs(Matrix probs);

struct LossGrad {
    double loss = 0.0;
    Matrix grad;  // same shape as the differentiated input
};

// Multi-label binary cross-entropy: sum over non-ignored categories, mean over
// the batch. Gradient is w.r.t. the clamped probabilities.
LossGrad bce_loss(const Matrix& labels, const Matrix& probs);

// Asymmetric focusing: positives weighted by (1-p)^gamma_pos, negatives by
// p^gamma_neg. With both gammas zero this reduces to bce_loss bit for bit.
LossGrad asl_loss(const Matrix& labels, const Matrix& probs, double gamma_pos,
                  double gamma_neg);

// Token-level cross-entropy: mean of -log softmax(logits_i)[target_i] over
// non-pad positions. Gradient is w.r.t. the logits.
LossGrad lm_loss(const Matrix& logits, const std::vector<int>& targets);

struct ItcResult {
    double loss = 0.0;
    Matrix grad_image;
    Matrix grad_text;
};

// Contrastive alignment over the cosine-similarity matrix with matched pairs
// on the diagonal:
//   S = normalize(I) . normalize(T)^T / temperature
//   loss = 1/2 [ CE over rows + CE over columns ], each averaged over B.
// Gradients are w.r.t. the raw (unnormalized) embeddings.
ItcResult itc_loss(const Matrix& image, const Matrix& text, double temperature);

struct VectorLossGrad {
    double loss = 0.0;
    std::vector<double> grad;
};

// Mean binary cross-entropy over M matched/unmatched candidate pairs.
VectorLossGrad itm_loss(const std::vector<double>& match_probs,
                        const std::vector<int>& labels);

// Samples j != anchor with probability softmax(similarity_row restricted to
// j != anchor); harder (more similar) negatives are picked more often.
// Deterministic for a fixed seed.
std::size_t hard_negative_sample(const std::vector<double>& similarity_row,
                                 std::size_t anchor, std::uint64_t seed);

// Off-anchor sampling distribution, exposed for inspection and tests.
std::vector<double> hard_negative_distribution(const std::vector<double>& similarity_row,
                                               std::size_t anchor);

}  // namespace tagmine::losskit
