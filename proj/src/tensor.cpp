#include "mixent/tensor.hpp"

#include <cblas.h>

#include <cmath>
#include <stdexcept>

namespace mixent {

Tensor Tensor::scalar(double v) {
    Tensor t;
    t.data_.assign(1, v);
    t.rows_ = 1;
    t.cols_ = 1;
    t.rank_ = 0;
    return t;
}

Tensor Tensor::zeros(long rows, long cols) {
    if (rows < 0 || cols < 0) throw std::runtime_error("tensor: negative shape");
    Tensor t;
    t.data_.assign(static_cast<size_t>(rows) * cols, 0.0);
    t.rows_ = rows;
    t.cols_ = cols;
    t.rank_ = 2;
    return t;
}

Tensor Tensor::zeros_vec(long n) {
    Tensor t;
    t.data_.assign(static_cast<size_t>(n), 0.0);
    t.rows_ = n;
    t.cols_ = 1;
    t.rank_ = 1;
    return t;
}

Tensor Tensor::full(long rows, long cols, double v) {
    Tensor t = zeros(rows, cols);
    t.fill(v);
    return t;
}

Tensor Tensor::from_vector(std::vector<double> v) {
    Tensor t;
    t.rows_ = static_cast<long>(v.size());
    t.cols_ = 1;
    t.rank_ = 1;
    t.data_ = std::move(v);
    return t;
}

Tensor Tensor::from_matrix(long rows, long cols, std::vector<double> v) {
    if (static_cast<long>(v.size()) != rows * cols)
        throw std::runtime_error("tensor: data size does not match shape");
    Tensor t;
    t.rows_ = rows;
    t.cols_ = cols;
    t.rank_ = 2;
    t.data_ = std::move(v);
    return t;
}

std::string Tensor::shape_str() const {
    if (rank_ == 0) return "[]";
    if (rank_ == 1) return "[" + std::to_string(rows_) + "]";
    return "[" + std::to_string(rows_) + "," + std::to_string(cols_) + "]";
}

double Tensor::item() const {
    if (size() != 1) throw std::runtime_error("tensor: item() on shape " + shape_str());
    return data_[0];
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

void Tensor::fill(double v) {
    for (double& x : data_) x = v;
}

static void check_rank2(const Tensor& t, const char* who) {
    if (t.rank() != 2) throw std::runtime_error(std::string(who) + ": expected matrix, got " + t.shape_str());
}

void gemm(const Tensor& A, bool transA, const Tensor& B, bool transB,
          double alpha, double beta, Tensor& C) {
    check_rank2(A, "gemm");
    check_rank2(B, "gemm");
    const long m = transA ? A.cols() : A.rows();
    const long k = transA ? A.rows() : A.cols();
    const long kb = transB ? B.cols() : B.rows();
    const long n = transB ? B.rows() : B.cols();
    if (k != kb)
        throw std::runtime_error("gemm: inner dims " + A.shape_str() + (transA ? "^T" : "") + " x " +
                                 B.shape_str() + (transB ? "^T" : ""));
    if (C.rank() != 2 || C.rows() != m || C.cols() != n)
        throw std::runtime_error("gemm: output shape " + C.shape_str());
    cblas_dgemm(CblasRowMajor, transA ? CblasTrans : CblasNoTrans, transB ? CblasTrans : CblasNoTrans,
                static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), alpha, A.data(),
                static_cast<int>(A.cols()), B.data(), static_cast<int>(B.cols()), beta, C.data(),
                static_cast<int>(C.cols()));
}

Tensor matmul(const Tensor& A, bool transA, const Tensor& B, bool transB) {
    const long m = transA ? A.cols() : A.rows();
    const long n = transB ? B.rows() : B.cols();
    Tensor C = Tensor::zeros(m, n);
    gemm(A, transA, B, transB, 1.0, 0.0, C);
    return C;
}

static void check_same(const Tensor& a, const Tensor& b, const char* who) {
    if (!a.same_shape(b))
        throw std::runtime_error(std::string(who) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

void add_inplace(Tensor& a, const Tensor& b) {
    check_same(a, b, "add");
    double* pa = a.data();
    const double* pb = b.data();
    for (long i = 0; i < a.size(); ++i) pa[i] += pb[i];
}

void axpy_inplace(Tensor& a, double alpha, const Tensor& b) {
    check_same(a, b, "axpy");
    double* pa = a.data();
    const double* pb = b.data();
    for (long i = 0; i < a.size(); ++i) pa[i] += alpha * pb[i];
}

Tensor add(const Tensor& a, const Tensor& b) {
    Tensor c = a;
    add_inplace(c, b);
    return c;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same(a, b, "sub");
    Tensor c = a;
    double* pc = c.data();
    const double* pb = b.data();
    for (long i = 0; i < c.size(); ++i) pc[i] -= pb[i];
    return c;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same(a, b, "mul");
    Tensor c = a;
    double* pc = c.data();
    const double* pb = b.data();
    for (long i = 0; i < c.size(); ++i) pc[i] *= pb[i];
    return c;
}

Tensor scale(const Tensor& a, double s) {
    Tensor c = a;
    double* pc = c.data();
    for (long i = 0; i < c.size(); ++i) pc[i] *= s;
    return c;
}

double sum_all(const Tensor& a) {
    double s = 0.0;
    const double* p = a.data();
    for (long i = 0; i < a.size(); ++i) s += p[i];
    return s;
}

double mean_all(const Tensor& a) {
    if (a.size() == 0) throw std::runtime_error("mean of empty tensor");
    return sum_all(a) / static_cast<double>(a.size());
}

Tensor rowsum(const Tensor& a) {
    check_rank2(a, "rowsum");
    Tensor out = Tensor::zeros_vec(a.rows());
    for (long i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        const double* row = a.data() + i * a.cols();
        for (long j = 0; j < a.cols(); ++j) s += row[j];
        out.at(i) = s;
    }
    return out;
}

Tensor colsum(const Tensor& a) {
    check_rank2(a, "colsum");
    Tensor out = Tensor::zeros_vec(a.cols());
    for (long i = 0; i < a.rows(); ++i) {
        const double* row = a.data() + i * a.cols();
        double* po = out.data();
        for (long j = 0; j < a.cols(); ++j) po[j] += row[j];
    }
    return out;
}

double logsumexp(const double* x, long n) {
    if (n <= 0) throw std::runtime_error("logsumexp of empty range");
    double m = x[0];
    for (long i = 1; i < n; ++i)
        if (x[i] > m) m = x[i];
    if (!std::isfinite(m)) {
        // All -inf -> -inf; any +inf/nan propagates.
        return m;
    }
    double s = 0.0;
    for (long i = 0; i < n; ++i) s += std::exp(x[i] - m);
    return m + std::log(s);
}

Tensor logsumexp_rows(const Tensor& a) {
    check_rank2(a, "logsumexp_rows");
    Tensor out = Tensor::zeros_vec(a.rows());
    for (long i = 0; i < a.rows(); ++i) out.at(i) = logsumexp(a.data() + i * a.cols(), a.cols());
    return out;
}

void softmax_rows_inplace(Tensor& a) {
    check_rank2(a, "softmax_rows");
    for (long i = 0; i < a.rows(); ++i) {
        double* row = a.data() + i * a.cols();
        double m = row[0];
        for (long j = 1; j < a.cols(); ++j)
            if (row[j] > m) m = row[j];
        double s = 0.0;
        for (long j = 0; j < a.cols(); ++j) {
            row[j] = std::exp(row[j] - m);
            s += row[j];
        }
        for (long j = 0; j < a.cols(); ++j) row[j] /= s;
    }
}

}  // namespace mixent
