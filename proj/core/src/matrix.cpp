#include "nodenet/matrix.hpp"

#include <cblas.h>

namespace nodenet {

namespace {

struct BlasSingleThread {
    BlasSingleThread() { openblas_set_num_threads(1); }
};
// Deterministic reductions and the single-core runtime budget both want one thread.
const BlasSingleThread blas_init;

} // namespace

template <>
Matrix<double> matmul(const Matrix<double>& a, const Matrix<double>& b,
                      bool transpose_a, bool transpose_b) {
    const std::size_t m = transpose_a ? a.cols() : a.rows();
    const std::size_t k = transpose_a ? a.rows() : a.cols();
    const std::size_t kb = transpose_b ? b.cols() : b.rows();
    const std::size_t n = transpose_b ? b.rows() : b.cols();
    if (k != kb) throw std::invalid_argument("matmul: inner dimensions do not match");
    Matrix<double> c(m, n);
    if (m == 0 || n == 0 || k == 0) return c;
    cblas_dgemm(CblasRowMajor, transpose_a ? CblasTrans : CblasNoTrans,
                transpose_b ? CblasTrans : CblasNoTrans,
                static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), 1.0,
                a.data(), static_cast<int>(a.cols()), b.data(), static_cast<int>(b.cols()),
                0.0, c.data(), static_cast<int>(c.cols()));
    return c;
}

template <>
Matrix<float> matmul(const Matrix<float>& a, const Matrix<float>& b,
                     bool transpose_a, bool transpose_b) {
    const std::size_t m = transpose_a ? a.cols() : a.rows();
    const std::size_t k = transpose_a ? a.rows() : a.cols();
    const std::size_t kb = transpose_b ? b.cols() : b.rows();
    const std::size_t n = transpose_b ? b.rows() : b.cols();
    if (k != kb) throw std::invalid_argument("matmul: inner dimensions do not match");
    Matrix<float> c(m, n);
    if (m == 0 || n == 0 || k == 0) return c;
    cblas_sgemm(CblasRowMajor, transpose_a ? CblasTrans : CblasNoTrans,
                transpose_b ? CblasTrans : CblasNoTrans,
                static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), 1.0f,
                a.data(), static_cast<int>(a.cols()), b.data(), static_cast<int>(b.cols()),
                0.0f, c.data(), static_cast<int>(c.cols()));
    return c;
}

} // namespace nodenet
