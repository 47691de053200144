#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "survfuse/error.hpp"

namespace survfuse {

// Dense row-major matrix of 64-bit reals. The only tensor type in the
// library; vectors are n x 1 (or 1 x n) matrices.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> v;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), v(r * c, fill) {}
    Matrix(std::initializer_list<std::initializer_list<double>> init) {
        rows = init.size();
        cols = rows ? init.begin()->size() : 0;
        v.reserve(rows * cols);
        for (const auto& row : init) {
            if (row.size() != cols) throw ShapeError("Matrix init: ragged rows");
            for (double x : row) v.push_back(x);
        }
    }

    static Matrix zeros(std::size_t r, std::size_t c) { return Matrix(r, c, 0.0); }
    static Matrix full(std::size_t r, std::size_t c, double x) { return Matrix(r, c, x); }
    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
        return m;
    }
    static Matrix column(const std::vector<double>& x) {
        Matrix m(x.size(), 1);
        m.v = x;
        return m;
    }

    double& at(std::size_t i, std::size_t j) { return v[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return v[i * cols + j]; }
    std::size_t size() const { return rows * cols; }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    std::string shape_str() const {
        std::ostringstream os;
        os << rows << "x" << cols;
        return os.str();
    }
};

inline bool all_finite(const Matrix& m) {
    for (double x : m.v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline bool all_finite(const std::vector<double>& x) {
    for (double v : x)
        if (!std::isfinite(v)) return false;
    return true;
}

// Plain (non-differentiable) helpers used by metrics code and tests.

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows)
        throw ShapeError("matmul: " + a.shape_str() + " incompatible with " + b.shape_str());
    Matrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a.at(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols; ++j) c.at(i, j) += aik * b.at(k, j);
        }
    return c;
}

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
    return t;
}

inline std::vector<double> col_to_vector(const Matrix& m) {
    if (m.cols != 1) throw ShapeError("col_to_vector: expected n x 1, got " + m.shape_str());
    return m.v;
}

inline Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
    Matrix out(rows.size(), m.cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= m.rows)
            throw ShapeError("take_rows: index " + std::to_string(rows[i]) + " out of " +
                             std::to_string(m.rows));
        for (std::size_t j = 0; j < m.cols; ++j) out.at(i, j) = m.at(rows[i], j);
    }
    return out;
}

template <typename T>
inline std::vector<T> take(const std::vector<T>& x, const std::vector<std::size_t>& idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) {
        if (i >= x.size()) throw ShapeError("take: index out of range");
        out.push_back(x[i]);
    }
    return out;
}

} // namespace survfuse
