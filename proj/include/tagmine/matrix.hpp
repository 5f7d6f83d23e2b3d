#pragma once

#include <cstddef>
#include <vector>

#include "tagmine/errors.hpp"

namespace tagmine {

// Dense row-major matrix of doubles. Deliberately minimal: the loss kernels,
// the linear tagger and the evaluation code only need element access and
// shape checks.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Matrix& other) const {
        return rows == other.rows && cols == other.cols;
    }
};

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (!a.same_shape(b))
        throw UsageError(std::string(what) + ": shape mismatch (" +
                         std::to_string(a.rows) + "x" + std::to_string(a.cols) + " vs " +
                         std::to_string(b.rows) + "x" + std::to_string(b.cols) + ")");
}

}  // namespace tagmine
