#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tagmine::gradcheck {

struct KernelReport {
    std::string kernel;
    std::size_t instances = 0;
    double max_rel_error = 0.0;
    bool pass = false;
};

// Central finite differences (h = 1e-5) against the analytic gradients on
// seeded random instances. Relative error uses max(1, |analytic|, |numeric|)
// in the denominator. A kernel passes at max_rel_error < tolerance.
std::vector<KernelReport> run_gradcheck(const std::vector<std::string>& kernels,
                                        std::uint64_t seed, std::size_t instances = 100,
                                        double tolerance = 1e-4);

// Plain-text table: kernel, instances, max relative error, pass/fail.
std::string format_report(const std::vector<KernelReport>& reports);

}  // namespace tagmine::gradcheck
