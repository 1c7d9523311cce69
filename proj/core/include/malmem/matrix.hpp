#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "malmem/error.hpp"

namespace malmem {

/// Dense row-major matrix of doubles. Rows are samples, columns are features.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return rows_ == 0 || cols_ == 0; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double> column(std::size_t c) const {
        std::vector<double> out(rows_);
        for (std::size_t r = 0; r < rows_; ++r) out[r] = data_[r * cols_ + c];
        return out;
    }

    /// New matrix holding the given rows, in the given order.
    Matrix select_rows(std::span<const std::size_t> idx) const {
        Matrix out(idx.size(), cols_);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            if (idx[i] >= rows_) throw Error("select_rows: row index out of range");
            const double* src = data_.data() + idx[i] * cols_;
            std::copy(src, src + cols_, out.data_.data() + i * cols_);
        }
        return out;
    }

    /// New matrix holding the given columns, in the given order.
    Matrix select_columns(std::span<const std::size_t> idx) const {
        Matrix out(rows_, idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i)
            if (idx[i] >= cols_) throw Error("select_columns: column index out of range");
        for (std::size_t r = 0; r < rows_; ++r) {
            const double* src = data_.data() + r * cols_;
            double* dst = out.data_.data() + r * idx.size();
            for (std::size_t i = 0; i < idx.size(); ++i) dst[i] = src[idx[i]];
        }
        return out;
    }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    bool operator==(const Matrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

}  // namespace malmem
