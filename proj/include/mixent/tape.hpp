#pragma once

#include <functional>
#include <vector>

#include "mixent/tensor.hpp"

namespace mixent {

// Handle into a Tape; cheap to copy.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Single-use reverse-mode tape.
//
// Build a graph eagerly with the op methods (forward values are computed
// immediately), call backward() once on a scalar output, then read gradients
// with grad()/grad_or_zero(). Gradients flow to every tracked node, including
// input leaves, so the same machinery serves parameter training and
// gradient-w.r.t.-x uses (e.g. drift fields). Nodes created from constant()
// are not tracked and receive no gradient.
//
// All reductions are sequential, so results are bit-reproducible.
class Tape {
public:
    // --- node creation ---
    Var leaf(Tensor value);      // tracked: receives gradient
    Var constant(Tensor value);  // untracked

    const Tensor& val(Var v) const { return node(v).value; }
    const Tensor& grad(Var v) const;  // throws if no gradient was accumulated
    Tensor grad_or_zero(Var v) const;

    // --- matrix ops ---
    Var matmul(Var a, Var b, bool ta = false, bool tb = false);
    Var affine(Var x, Var W, Var b);  // x[n,k] * W[m,k]^T + b[m] -> [n,m]
    Var matvec(Var A, Var x);         // A[n,m] * x[m] -> [n]

    // --- elementwise ---
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double s);
    Var add_const(Var a, double c);
    Var neg(Var a) { return scale(a, -1.0); }
    Var relu(Var a);
    Var elu(Var a);  // alpha = 1
    Var exp_(Var a);
    Var log_(Var a);

    // --- reductions ---
    Var sum(Var a);   // -> scalar
    Var mean(Var a);  // -> scalar
    Var rowsum(Var a);                 // [n,m] -> [n]
    Var l2sq_rows(Var a);              // [n,m] -> [n], sum of squares per row
    Var logsumexp_rows(Var a);         // [n,m] -> [n]
    Var logsumexp_vec(Var a);          // [n] -> scalar
    Var softmax_rows(Var a);           // [n,m] -> [n,m]

    // --- shape / selection ---
    Var col(Var a, long j);      // [n,m] -> [n]
    Var row(Var a, long i);      // [n,m] -> [m]
    Var element(Var a, long i);  // vector -> scalar
    Var concat_cols(const std::vector<Var>& cols);  // k x [n] -> [n,k]
    Var concat_rows(const std::vector<Var>& mats);  // same col count
    Var slice_rows(Var a, long r0, long r1);        // [r0,r1)
    Var gather_rows(Var a, std::vector<long> idx);  // matrix or vector
    // Place vector a[k] at positions idx of a zero [n] vector (idx unique).
    Var scatter_vec(Var a, std::vector<long> idx, long n);

    // --- broadcasts ---
    Var add_rowvec(Var X, Var b);  // X[n,m] + b[m]
    Var sub_rowvec(Var X, Var b);
    Var mul_rowvec(Var X, Var b);
    Var add_scalar_var(Var a, Var s);  // a + s, s scalar
    Var sub_scalar_var(Var a, Var s);
    Var dot(Var a, Var b);  // vectors -> scalar

    // Materialize a lower-triangular matrix from a packed vector of length
    // d(d+1)/2 (row-major lower triangle); diagonal entries are stored as
    // logs and exponentiated, so the result always has positive diagonal.
    Var tril_exp_diag(Var packed, int d);

    void backward(Var out);
    bool consumed() const { return consumed_; }
    size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;  // empty until first accumulation
        bool tracked = false;
        std::function<void()> back;  // pulls this node's grad into inputs
    };

    Node& node(Var v);
    const Node& node(Var v) const;
    Tensor& ensure_grad(int id);
    bool has_grad(int id) const { return nodes_[id].grad.size() > 0; }
    Var make(Tensor value, bool tracked, std::function<void()> back);
    // Shorthand: new node tracked iff any input is tracked.
    Var make_op(Tensor value, std::initializer_list<Var> inputs, std::function<void()> back);

    std::vector<Node> nodes_;
    bool consumed_ = false;
};

}  // namespace mixent
