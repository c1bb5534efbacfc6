#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace mixent {

// Dense row-major tensor of doubles, rank 0 (scalar), 1 (vector) or 2 (matrix).
// All shape mismatches throw; there is no implicit broadcasting at this level.
class Tensor {
public:
    Tensor() = default;
    static Tensor scalar(double v);
    static Tensor zeros(long rows, long cols);
    static Tensor zeros_vec(long n);
    static Tensor full(long rows, long cols, double v);
    static Tensor from_vector(std::vector<double> v);          // rank 1
    static Tensor from_matrix(long rows, long cols, std::vector<double> v);

    int rank() const { return rank_; }
    long rows() const { return rows_; }
    long cols() const { return cols_; }
    long size() const { return static_cast<long>(data_.size()); }
    bool same_shape(const Tensor& o) const {
        return rank_ == o.rank_ && rows_ == o.rows_ && cols_ == o.cols_;
    }
    std::string shape_str() const;

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& at(long i) { return data_[i]; }
    double at(long i) const { return data_[i]; }
    double& at(long i, long j) { return data_[i * cols_ + j]; }
    double at(long i, long j) const { return data_[i * cols_ + j]; }
    double item() const;  // rank-0/size-1 accessor

    bool all_finite() const;
    void fill(double v);

private:
    std::vector<double> data_;
    long rows_ = 0, cols_ = 0;
    int rank_ = 0;
};

// --- BLAS-backed and elementwise kernels (plain numeric, no autodiff) ---

// C = alpha * op(A) * op(B) + beta * C, shapes validated.
void gemm(const Tensor& A, bool transA, const Tensor& B, bool transB,
          double alpha, double beta, Tensor& C);
Tensor matmul(const Tensor& A, bool transA, const Tensor& B, bool transB);

void add_inplace(Tensor& a, const Tensor& b);                 // a += b
void axpy_inplace(Tensor& a, double alpha, const Tensor& b);  // a += alpha*b
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

// Reductions; all sequential for run-to-run determinism.
double sum_all(const Tensor& a);
double mean_all(const Tensor& a);
Tensor rowsum(const Tensor& a);   // [n,m] -> [n]
Tensor colsum(const Tensor& a);   // [n,m] -> [m]

// Stabilized log-sum-exp of a flat range / of each row.
double logsumexp(const double* x, long n);
Tensor logsumexp_rows(const Tensor& a);  // [n,m] -> [n]

// In-place softmax of each row (stabilized).
void softmax_rows_inplace(Tensor& a);

}  // namespace mixent
