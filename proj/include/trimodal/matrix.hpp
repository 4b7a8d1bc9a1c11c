#pragma once

// Dense row-major matrices in double precision with the handful of kernels the
// aligner needs. All reductions run left to right over indices so results are
// bit-reproducible across runs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "trimodal/error.hpp"

namespace trimodal {

using Vector = std::vector<double>;

class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_) {
            throw shape_error("matrix data length " + std::to_string(data_.size()) +
                              " does not match " + shape_string(rows_, cols_));
        }
    }

    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& row : rows) {
            if (row.size() != cols_) {
                throw shape_error("ragged matrix literal");
            }
            data_.insert(data_.end(), row.begin(), row.end());
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            m(i, i) = 1.0;
        }
        return m;
    }

    static Matrix from_row(std::span<const double> row) {
        return Matrix(1, row.size(), std::vector<double>(row.begin(), row.end()));
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    std::string shape() const { return shape_string(rows_, cols_); }

    bool all_finite() const noexcept {
        for (double v : data_) {
            if (!std::isfinite(v)) {
                return false;
            }
        }
        return true;
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

    static std::string shape_string(std::size_t r, std::size_t c) {
        return "[" + std::to_string(r) + "x" + std::to_string(c) + "]";
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Standard product a*b. Each output entry accumulates over the inner index in
/// ascending order; rows are processed four at a time to reuse each row of b,
/// which leaves the per-entry summation order unchanged.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw shape_error("matmul: inner dimensions disagree between " + a.shape() + " and " +
                          b.shape());
    }
    Matrix out(a.rows(), b.cols());
    const std::size_t n = b.cols();
    const std::size_t inner = a.cols();
    std::size_t i = 0;
    for (; i + 4 <= a.rows(); i += 4) {
        double* o0 = out.row(i).data();
        double* o1 = out.row(i + 1).data();
        double* o2 = out.row(i + 2).data();
        double* o3 = out.row(i + 3).data();
        for (std::size_t k = 0; k < inner; ++k) {
            const double a0 = a(i, k);
            const double a1 = a(i + 1, k);
            const double a2 = a(i + 2, k);
            const double a3 = a(i + 3, k);
            const double* b_row = b.row(k).data();
            for (std::size_t j = 0; j < n; ++j) {
                const double bj = b_row[j];
                o0[j] += a0 * bj;
                o1[j] += a1 * bj;
                o2[j] += a2 * bj;
                o3[j] += a3 * bj;
            }
        }
    }
    for (; i < a.rows(); ++i) {
        double* out_row = out.row(i).data();
        for (std::size_t k = 0; k < inner; ++k) {
            const double aik = a(i, k);
            const double* b_row = b.row(k).data();
            for (std::size_t j = 0; j < n; ++j) {
                out_row[j] += aik * b_row[j];
            }
        }
    }
    return out;
}

/// a^T * b without materializing the transpose. Entries accumulate over the
/// rows of a in ascending order.
inline Matrix matmul_transpose_a(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw shape_error("matmul_transpose_a: row counts disagree between " + a.shape() +
                          " and " + b.shape());
    }
    Matrix out(a.cols(), b.cols());
    const std::size_t n = b.cols();
    std::size_t r = 0;
    for (; r + 4 <= a.rows(); r += 4) {
        const double* b0 = b.row(r).data();
        const double* b1 = b.row(r + 1).data();
        const double* b2 = b.row(r + 2).data();
        const double* b3 = b.row(r + 3).data();
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double a0 = a(r, i);
            const double a1 = a(r + 1, i);
            const double a2 = a(r + 2, i);
            const double a3 = a(r + 3, i);
            double* out_row = out.row(i).data();
            for (std::size_t j = 0; j < n; ++j) {
                double acc = out_row[j];
                acc += a0 * b0[j];
                acc += a1 * b1[j];
                acc += a2 * b2[j];
                acc += a3 * b3[j];
                out_row[j] = acc;
            }
        }
    }
    for (; r < a.rows(); ++r) {
        const double* b_row = b.row(r).data();
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double ari = a(r, i);
            double* out_row = out.row(i).data();
            for (std::size_t j = 0; j < n; ++j) {
                out_row[j] += ari * b_row[j];
            }
        }
    }
    return out;
}

/// a * b^T, i.e. the matrix of row-wise dot products.
inline Matrix matmul_transpose_b(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw shape_error("matmul_transpose_b: column counts disagree between " + a.shape() +
                          " and " + b.shape());
    }
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto a_row = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const auto b_row = b.row(j);
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) {
                acc += a_row[k] * b_row[k];
            }
            out(i, j) = acc;
        }
    }
    return out;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw shape_error("dot: lengths " + std::to_string(a.size()) + " and " +
                          std::to_string(b.size()) + " differ");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

inline double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

/// Rows whose norm falls below this are treated as degenerate.
inline constexpr double degenerate_norm = 1e-12;

struct NormalizedRows {
    Matrix values;
    std::vector<double> norms;    // pre-normalization norm of each row
    std::vector<bool> degenerate; // row was (near) zero and left as zeros
};

inline NormalizedRows l2_normalize_rows_detailed(const Matrix& m) {
    NormalizedRows out{Matrix(m.rows(), m.cols()), std::vector<double>(m.rows()),
                       std::vector<bool>(m.rows(), false)};
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto src = m.row(r);
        const double n = norm(src);
        out.norms[r] = n;
        // A NaN norm is not degenerate; it propagates so callers see it.
        if (n < degenerate_norm) {
            out.degenerate[r] = true;
            continue;
        }
        auto dst = out.values.row(r);
        for (std::size_t c = 0; c < src.size(); ++c) {
            dst[c] = src[c] / n;
        }
    }
    return out;
}

inline Matrix l2_normalize_rows(const Matrix& m) { return l2_normalize_rows_detailed(m).values; }

/// Arithmetic mean over rows. Each column is summed in ascending value order,
/// so the result is bit-identical under any permutation of the rows.
inline Vector mean_pool_rows(const Matrix& m) {
    if (m.rows() == 0) {
        throw empty_input_error("mean_pool_rows: matrix has no rows");
    }
    Vector out(m.cols(), 0.0);
    const double inv = 1.0 / static_cast<double>(m.rows());
    if (m.rows() == 1) {
        const auto src = m.row(0);
        for (std::size_t c = 0; c < out.size(); ++c) {
            out[c] = src[c] * inv;
        }
        return out;
    }
    std::vector<double> column(m.rows());
    for (std::size_t c = 0; c < out.size(); ++c) {
        for (std::size_t r = 0; r < m.rows(); ++r) {
            column[r] = m(r, c);
        }
        std::sort(column.begin(), column.end());
        double acc = 0.0;
        for (double v : column) {
            acc += v;
        }
        out[c] = acc * inv;
    }
    return out;
}

} // namespace trimodal
