#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace nodenet {

// Dense row-major matrix. Heavy products go through BLAS (see matmul),
// everything else is plain loops.
template <typename T>
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, T fill = T(0))
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    const T& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    T* row(std::size_t i) { return data_.data() + i * cols_; }
    const T* row(std::size_t i) const { return data_.data() + i * cols_; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    std::vector<T>& storage() { return data_; }
    const std::vector<T>& storage() const { return data_; }

    void fill(T value) { data_.assign(data_.size(), value); }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    bool operator==(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

// C = op(A) * op(B) with op = identity or transpose. Backed by cblas gemm.
template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b,
                 bool transpose_a = false, bool transpose_b = false);

template <typename T>
Matrix<T> convert_matrix(const Matrix<double>& m) {
    Matrix<T> out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.size(); ++i) out.data()[i] = static_cast<T>(m.data()[i]);
    return out;
}

} // namespace nodenet
