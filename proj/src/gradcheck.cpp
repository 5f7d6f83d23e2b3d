#include "tagmine/gradcheck.hpp"

#include <cmath>
#include <cstdio>
#include <functional>

#include "tagmine/errors.hpp"
#include "tagmine/losskit.hpp"
#include "tagmine/rng.hpp"

namespace tagmine::gradcheck {

namespace {

constexpr double kStep = 1e-5;

double rel_error(double analytic, double numeric) {
    double denom = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
    return std::fabs(analytic - numeric) / denom;
}

// Central difference of a scalar function over one flat parameter vector.
double max_grad_error(std::vector<double>& params, const std::vector<double>& analytic,
                      const std::function<double()>& eval) {
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        double saved = params[i];
        params[i] = saved + kStep;
        double up = eval();
        params[i] = saved - kStep;
        double down = eval();
        params[i] = saved;
        double numeric = (up - down) / (2.0 * kStep);
        worst = std::max(worst, rel_error(analytic[i], numeric));
    }
    return worst;
}

Matrix random_labels(Rng& rng, std::size_t rows, std::size_t cols, bool with_ignore) {
    Matrix labels(rows, cols);
    bool any_active = false;
    for (double& v : labels.data) {
        double u = uniform01(rng);
        if (with_ignore && u < 0.15) {
            v = losskit::kIgnoreLabel;
        } else {
            v = u < 0.55 ? 0.0 : 1.0;
            any_active = true;
        }
    }
    if (!any_active) labels.data[0] = 1.0;
    return labels;
}

Matrix random_probs(Rng& rng, std::size_t rows, std::size_t cols) {
    Matrix probs(rows, cols);
    for (double& v : probs.data) v = 0.05 + 0.9 * uniform01(rng);
    return probs;
}

double check_bce(Rng& rng) {
    Matrix labels = random_labels(rng, 3, 4, true);
    Matrix probs = random_probs(rng, 3, 4);
    auto result = losskit::bce_loss(labels, probs);
    return max_grad_error(probs.data, result.grad.data,
                          [&] { return losskit::bce_loss(labels, probs).loss; });
}

double check_asl(Rng& rng) {
    Matrix labels = random_labels(rng, 4, 6, true);
    Matrix probs = random_probs(rng, 4, 6);
    double gamma_pos = uniform01(rng) < 0.5 ? 0.0 : 2.0 * uniform01(rng);
    double gamma_neg = 4.0 * uniform01(rng);
    auto result = losskit::asl_loss(labels, probs, gamma_pos, gamma_neg);
    return max_grad_error(probs.data, result.grad.data, [&] {
        return losskit::asl_loss(labels, probs, gamma_pos, gamma_neg).loss;
    });
}

double check_lm(Rng& rng) {
    const std::size_t positions = 5, vocab = 7;
    Matrix logits(positions, vocab);
    for (double& v : logits.data) v = 4.0 * uniform01(rng) - 2.0;
    std::vector<int> targets(positions);
    bool any_active = false;
    for (auto& t : targets) {
        if (uniform01(rng) < 0.2) {
            t = losskit::kPadToken;
        } else {
            t = static_cast<int>(uniform_below(rng, vocab));
            any_active = true;
        }
    }
    if (!any_active) targets[0] = 0;
    auto result = losskit::lm_loss(logits, targets);
    return max_grad_error(logits.data, result.grad.data,
                          [&] { return losskit::lm_loss(logits, targets).loss; });
}

double check_itc(Rng& rng) {
    const std::size_t batch = 4, dim = 8;
    Matrix image(batch, dim), text(batch, dim);
    for (double& v : image.data) v = normal01(rng);
    for (double& v : text.data) v = normal01(rng);
    double temperature = 0.07 + 0.5 * uniform01(rng);
    auto result = losskit::itc_loss(image, text, temperature);
    double worst = max_grad_error(image.data, result.grad_image.data, [&] {
        return losskit::itc_loss(image, text, temperature).loss;
    });
    worst = std::max(worst,
                     max_grad_error(text.data, result.grad_text.data, [&] {
                         return losskit::itc_loss(image, text, temperature).loss;
                     }));
    return worst;
}

double check_itm(Rng& rng) {
    const std::size_t count = 10;
    std::vector<double> probs(count);
    std::vector<int> labels(count);
    for (auto& p : probs) p = 0.05 + 0.9 * uniform01(rng);
    for (auto& y : labels) y = uniform01(rng) < 0.5 ? 0 : 1;
    auto result = losskit::itm_loss(probs, labels);
    double worst = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        double saved = probs[i];
        probs[i] = saved + kStep;
        double up = losskit::itm_loss(probs, labels).loss;
        probs[i] = saved - kStep;
        double down = losskit::itm_loss(probs, labels).loss;
        probs[i] = saved;
        worst = std::max(worst, rel_error(result.grad[i], (up - down) / (2.0 * kStep)));
    }
    return worst;
}

}  // namespace

std::vector<KernelReport> run_gradcheck(const std::vector<std::string>& kernels,
                                        std::uint64_t seed, std::size_t instances,
                                        double tolerance) {
    std::vector<KernelReport> reports;
    for (const auto& kernel : kernels) {
        std::function<double(Rng&)> check;
        if (kernel == "bce") check = check_bce;
        else if (kernel == "asl") check = check_asl;
        else if (kernel == "lm") check = check_lm;
        else if (kernel == "itc") check = check_itc;
        else if (kernel == "itm") check = check_itm;
        else throw UsageError("unknown loss kernel: " + kernel);

        KernelReport report;
        report.kernel = kernel;
        report.instances = instances;
        Rng rng = make_rng(seed);
        for (std::size_t i = 0; i < instances; ++i)
            report.max_rel_error = std::max(report.max_rel_error, check(rng));
        report.pass = report.max_rel_error < tolerance;
        reports.push_back(report);
    }
    return reports;
}

std::string format_report(const std::vector<KernelReport>& reports) {
    std::string out = "kernel\tinstances\tmax_rel_error\tstatus\n";
    char line[128];
    for (const auto& r : reports) {
        std::snprintf(line, sizeof(line), "%s\t%zu\t%.3e\t%s\n", r.kernel.c_str(),
                      r.instances, r.max_rel_error, r.pass ? "pass" : "FAIL");
        out += line;
    }
    return out;
}

}  // namespace tagmine::gradcheck
