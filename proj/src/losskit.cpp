#include "tagmine/losskit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tagmine/errors.hpp"
#include "tagmine/rng.hpp"

namespace tagmine::losskit {

double clamp_prob(double p) {
    return std::min(1.0 - kProbEpsilon, std::max(kProbEpsilon, p));
}

Matrix clamp_probs(Matrix probs) {
    for (double& p : probs.data) p = clamp_prob(p);
    return probs;
}

namespace {

void check_labels(const Matrix& labels, const Matrix& probs, const char* what) {
    require_same_shape(labels, probs, what);
    if (labels.rows == 0 || labels.cols == 0)
        throw UsageError(std::string(what) + ": empty batch");
    bool any_active = false;
    for (double y : labels.data) {
        if (y == kIgnoreLabel) continue;
        if (y != 0.0 && y != 1.0)
            throw UsageError(std::string(what) + ": labels must be 0, 1 or ignore");
        any_active = true;
    }
    if (!any_active)
        throw UsageError(std::string(what) + ": all labels ignored, loss undefined");
}

}  // namespace

LossGrad bce_loss(const Matrix& labels, const Matrix& probs) {
    check_labels(labels, probs, "bce_loss");
    const double batch = static_cast<double>(labels.rows);
    LossGrad out;
    out.grad = Matrix(labels.rows, labels.cols);
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        double y = labels.data[i];
        if (y == kIgnoreLabel) continue;
        double p = clamp_prob(probs.data[i]);
        total += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
        out.grad.data[i] = (-y / p + (1.0 - y) / (1.0 - p)) / batch;
    }
    out.loss = total / batch;
    return out;
}

LossGrad asl_loss(const Matrix& labels, const Matrix& probs, double gamma_pos,
                  double gamma_neg) {
    check_labels(labels, probs, "asl_loss");
    if (gamma_pos < 0.0 || gamma_neg < 0.0)
        throw UsageError("asl_loss: focusing parameters must be non-negative");
    const double batch = static_cast<double>(labels.rows);
    LossGrad out;
    out.grad = Matrix(labels.rows, labels.cols);
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        double y = labels.data[i];
        if (y == kIgnoreLabel) continue;
        double p = clamp_prob(probs.data[i]);
        double log_p = std::log(p);
        double log_q = std::log(1.0 - p);
        double pos_w = gamma_pos == 0.0 ? 1.0 : std::pow(1.0 - p, gamma_pos);
        double neg_w = gamma_neg == 0.0 ? 1.0 : std::pow(p, gamma_neg);
        total += -(y * pos_w * log_p + (1.0 - y) * neg_w * log_q);
        // d/dp of -y (1-p)^g+ log p = y [ g+ (1-p)^{g+-1} log p - (1-p)^{g+} / p ]
        double d_pos = gamma_pos == 0.0
                           ? -1.0 / p
                           : gamma_pos * std::pow(1.0 - p, gamma_pos - 1.0) * log_p -
                                 pos_w / p;
        // d/dp of -(1-y) p^g- log(1-p) = (1-y) [ p^{g-} / (1-p) - g- p^{g--1} log(1-p) ]
        double d_neg = gamma_neg == 0.0
                           ? 1.0 / (1.0 - p)
                           : neg_w / (1.0 - p) -
                                 gamma_neg * std::pow(p, gamma_neg - 1.0) * log_q;
        out.grad.data[i] = (y * d_pos + (1.0 - y) * d_neg) / batch;
    }
    out.loss = total / batch;
    return out;
}

LossGrad lm_loss(const Matrix& logits, const std::vector<int>& targets) {
    if (targets.size() != logits.rows)
        throw UsageError("lm_loss: one target per logit row required");
    if (logits.cols == 0) throw UsageError("lm_loss: empty vocabulary");
    std::size_t active = 0;
    for (int t : targets) {
        if (t == kPadToken) continue;
        if (t < 0 || static_cast<std::size_t>(t) >= logits.cols)
            throw UsageError("lm_loss: target id out of range");
        ++active;
    }
    if (active == 0) throw UsageError("lm_loss: all targets are pad, loss undefined");

    LossGrad out;
    out.grad = Matrix(logits.rows, logits.cols);
    double total = 0.0;
    const double scale = 1.0 / static_cast<double>(active);
    for (std::size_t r = 0; r < logits.rows; ++r) {
        if (targets[r] == kPadToken) continue;
        double max_logit = logits(r, 0);
        for (std::size_t c = 1; c < logits.cols; ++c)
            max_logit = std::max(max_logit, logits(r, c));
        double denom = 0.0;
        for (std::size_t c = 0; c < logits.cols; ++c)
            denom += std::exp(logits(r, c) - max_logit);
        double log_denom = std::log(denom);
        std::size_t t = static_cast<std::size_t>(targets[r]);
        total += -(logits(r, t) - max_logit - log_denom);
        for (std::size_t c = 0; c < logits.cols; ++c) {
            double softmax = std::exp(logits(r, c) - max_logit) / denom;
            out.grad(r, c) = (softmax - (c == t ? 1.0 : 0.0)) * scale;
        }
    }
    out.loss = total * scale;
    return out;
}

namespace {

// Row-normalize; returns norms. Zero rows are rejected: cosine is undefined.
Matrix normalize_rows(const Matrix& m, std::vector<double>& norms, const char* what) {
    Matrix out = m;
    norms.assign(m.rows, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        double sq = 0.0;
        for (std::size_t c = 0; c < m.cols; ++c) sq += m(r, c) * m(r, c);
        double norm = std::sqrt(sq);
        if (norm == 0.0)
            throw UsageError(std::string(what) + ": zero-norm embedding row " +
                             std::to_string(r));
        norms[r] = norm;
        for (std::size_t c = 0; c < m.cols; ++c) out(r, c) /= norm;
    }
    return out;
}

}  // namespace

ItcResult itc_loss(const Matrix& image, const Matrix& text, double temperature) {
    if (image.rows == 0) throw UsageError("itc_loss: empty batch");
    require_same_shape(image, text, "itc_loss");
    if (temperature <= 0.0) throw UsageError("itc_loss: temperature must be positive");

    const std::size_t batch = image.rows;
    const std::size_t dim = image.cols;
    std::vector<double> image_norms, text_norms;
    Matrix img = normalize_rows(image, image_norms, "itc_loss image");
    Matrix txt = normalize_rows(text, text_norms, "itc_loss text");

    Matrix sim(batch, batch);
    for (std::size_t i = 0; i < batch; ++i)
        for (std::size_t j = 0; j < batch; ++j) {
            double dot = 0.0;
            for (std::size_t c = 0; c < dim; ++c) dot += img(i, c) * txt(j, c);
            sim(i, j) = dot / temperature;
        }

    // dL/dS accumulates the row-wise (image->text) and column-wise
    // (text->image) softmax cross-entropies, each averaged over the batch
    // and halved.
    Matrix dsim(batch, batch);
    double total = 0.0;
    const double scale = 0.5 / static_cast<double>(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        double max_s = sim(i, 0);
        for (std::size_t j = 1; j < batch; ++j) max_s = std::max(max_s, sim(i, j));
        double denom = 0.0;
        for (std::size_t j = 0; j < batch; ++j) denom += std::exp(sim(i, j) - max_s);
        total += -(sim(i, i) - max_s - std::log(denom));
        for (std::size_t j = 0; j < batch; ++j) {
            double softmax = std::exp(sim(i, j) - max_s) / denom;
            dsim(i, j) += (softmax - (i == j ? 1.0 : 0.0)) * scale;
        }
    }
    for (std::size_t j = 0; j < batch; ++j) {
        double max_s = sim(0, j);
        for (std::size_t i = 1; i < batch; ++i) max_s = std::max(max_s, sim(i, j));
        double denom = 0.0;
        for (std::size_t i = 0; i < batch; ++i) denom += std::exp(sim(i, j) - max_s);
        total += -(sim(j, j) - max_s - std::log(denom));
        for (std::size_t i = 0; i < batch; ++i) {
            double softmax = std::exp(sim(i, j) - max_s) / denom;
            dsim(i, j) += (softmax - (i == j ? 1.0 : 0.0)) * scale;
        }
    }

    ItcResult out;
    out.loss = total * scale;
    out.grad_image = Matrix(batch, dim);
    out.grad_text = Matrix(batch, dim);

    // Chain first onto the normalized rows, then project through normalization:
    // for y = x/|x|, dL/dx = (dL/dy - (y . dL/dy) y) / |x|.
    for (std::size_t i = 0; i < batch; ++i) {
        std::vector<double> d_hat(dim, 0.0);
        for (std::size_t j = 0; j < batch; ++j) {
            double g = dsim(i, j) / temperature;
            for (std::size_t c = 0; c < dim; ++c) d_hat[c] += g * txt(j, c);
        }
        double dot = 0.0;
        for (std::size_t c = 0; c < dim; ++c) dot += d_hat[c] * img(i, c);
        for (std::size_t c = 0; c < dim; ++c)
            out.grad_image(i, c) = (d_hat[c] - dot * img(i, c)) / image_norms[i];
    }
    for (std::size_t j = 0; j < batch; ++j) {
        std::vector<double> d_hat(dim, 0.0);
        for (std::size_t i = 0; i < batch; ++i) {
            double g = dsim(i, j) / temperature;
            for (std::size_t c = 0; c < dim; ++c) d_hat[c] += g * img(i, c);
        }
        double dot = 0.0;
        for (std::size_t c = 0; c < dim; ++c) dot += d_hat[c] * txt(j, c);
        for (std::size_t c = 0; c < dim; ++c)
            out.grad_text(j, c) = (d_hat[c] - dot * txt(j, c)) / text_norms[j];
    }
    return out;
}

VectorLossGrad itm_loss(const std::vector<double>& match_probs,
                        const std::vector<int>& labels) {
    if (match_probs.empty()) throw UsageError("itm_loss: empty candidate list");
    if (match_probs.size() != labels.size())
        throw UsageError("itm_loss: probs and labels must have equal length");
    const double count = static_cast<double>(match_probs.size());
    VectorLossGrad out;
    out.grad.resize(match_probs.size());
    double total = 0.0;
    for (std::size_t i = 0; i < match_probs.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1)
            throw UsageError("itm_loss: labels must be 0 or 1");
        double y = static_cast<double>(labels[i]);
        double p = clamp_prob(match_probs[i]);
        total += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
        out.grad[i] = (-y / p + (1.0 - y) / (1.0 - p)) / count;
    }
    out.loss = total / count;
    return out;
}

std::vector<double> hard_negative_distribution(const std::vector<double>& similarity_row,
                                               std::size_t anchor) {
    if (similarity_row.size() < 2)
        throw UsageError("hard_negative_sample: need at least 2 candidates");
    if (anchor >= similarity_row.size())
        throw UsageError("hard_negative_sample: anchor out of range");
    double max_s = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < similarity_row.size(); ++j)
        if (j != anchor) max_s = std::max(max_s, similarity_row[j]);
    std::vector<double> probs(similarity_row.size(), 0.0);
    double denom = 0.0;
    for (std::size_t j = 0; j < similarity_row.size(); ++j) {
        if (j == anchor) continue;
        probs[j] = std::exp(similarity_row[j] - max_s);
        denom += probs[j];
    }
    for (double& p : probs) p /= denom;
    return probs;
}

std::size_t hard_negative_sample(const std::vector<double>& similarity_row,
                                 std::size_t anchor, std::uint64_t seed) {
    std::vector<double> probs = hard_negative_distribution(similarity_row, anchor);
    Rng rng = make_rng(seed);
    double u = uniform01(rng);
    double cumulative = 0.0;
    std::size_t last_valid = 0;
    for (std::size_t j = 0; j < probs.size(); ++j) {
        if (j == anchor) continue;
        last_valid = j;
        cumulative += probs[j];
        if (u < cumulative) return j;
    }
    return last_valid;  // guards the cumulative == 1.0 rounding edge
}

}  // namespace tagmine::losskit
