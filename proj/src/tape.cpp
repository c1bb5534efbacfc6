#include "mixent/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace mixent {

Tape::Node& Tape::node(Var v) {
    if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
        throw std::runtime_error("tape: invalid var handle");
    return nodes_[v.id];
}

const Tape::Node& Tape::node(Var v) const {
    if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
        throw std::runtime_error("tape: invalid var handle");
    return nodes_[v.id];
}

Tensor& Tape::ensure_grad(int id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) {
        const Tensor& v = n.value;
        if (v.rank() == 0)
            n.grad = Tensor::scalar(0.0);
        else if (v.rank() == 1)
            n.grad = Tensor::zeros_vec(v.rows());
        else
            n.grad = Tensor::zeros(v.rows(), v.cols());
    }
    return n.grad;
}

Var Tape::make(Tensor value, bool tracked, std::function<void()> back) {
    nodes_.push_back(Node{std::move(value), Tensor{}, tracked, std::move(back)});
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::make_op(Tensor value, std::initializer_list<Var> inputs, std::function<void()> back) {
    bool tracked = false;
    for (Var v : inputs) tracked = tracked || node(v).tracked;
    return make(std::move(value), tracked, tracked ? std::move(back) : std::function<void()>{});
}

Var Tape::leaf(Tensor value) { return make(std::move(value), true, {}); }
Var Tape::constant(Tensor value) { return make(std::move(value), false, {}); }

const Tensor& Tape::grad(Var v) const {
    const Node& n = node(v);
    if (n.grad.size() == 0) throw std::runtime_error("tape: no gradient at this node");
    return n.grad;
}

Tensor Tape::grad_or_zero(Var v) const {
    const Node& n = node(v);
    if (n.grad.size() > 0) return n.grad;
    if (n.value.rank() == 0) return Tensor::scalar(0.0);
    if (n.value.rank() == 1) return Tensor::zeros_vec(n.value.rows());
    return Tensor::zeros(n.value.rows(), n.value.cols());
}

// Accumulate helper used by the closures below.
#define ACC(id) (nodes_[(id)].tracked ? &ensure_grad(id) : nullptr)

Var Tape::matmul(Var a, Var b, bool ta, bool tb) {
    Tensor c = mixent::matmul(node(a).value, ta, node(b).value, tb);
    int ia = a.id, ib = b.id;
    Var out = make_op(std::move(c), {a, b}, nullptr);
    int io = out.id;
    node(out).back = [this, ia, ib, io, ta, tb]() {
        const Tensor& g = nodes_[io].grad;
        const Tensor& A = nodes_[ia].value;
        const Tensor& B = nodes_[ib].value;
        if (Tensor* da = ACC(ia)) {
            if (!ta && !tb)
                gemm(g, false, B, true, 1.0, 1.0, *da);
            else if (ta && !tb)
                gemm(B, false, g, true, 1.0, 1.0, *da);
            else if (!ta && tb)
                gemm(g, false, B, false, 1.0, 1.0, *da);
            else
                gemm(B, true, g, true, 1.0, 1.0, *da);
        }
        if (Tensor* db = ACC(ib)) {
            if (!ta && !tb)
                gemm(A, true, g, false, 1.0, 1.0, *db);
            else if (ta && !tb)
                gemm(A, false, g, false, 1.0, 1.0, *db);
            else if (!ta && tb)
                gemm(g, true, A, false, 1.0, 1.0, *db);
            else
                gemm(g, true, A, true, 1.0, 1.0, *db);
        }
    };
    return out;
}

Var Tape::affine(Var x, Var W, Var b) {
    const Tensor& X = node(x).value;
    const Tensor& Wv = node(W).value;
    const Tensor& bv = node(b).value;
    if (X.rank() != 2 || Wv.rank() != 2 || bv.rank() != 1 || X.cols() != Wv.cols() || Wv.rows() != bv.rows())
        throw std::runtime_error("affine: shapes " + X.shape_str() + " " + Wv.shape_str() + " " + bv.shape_str());
    // Fill output rows with the bias, then gemm with beta = 1.
    Tensor Y = Tensor::zeros(X.rows(), Wv.rows());
    for (long i = 0; i < Y.rows(); ++i)
        for (long j = 0; j < Y.cols(); ++j) Y.at(i, j) = bv.at(j);
    gemm(X, false, Wv, true, 1.0, 1.0, Y);
    int ix = x.id, iw = W.id, ib = b.id;
    Var out = make_op(std::move(Y), {x, W, b}, nullptr);
    int io = out.id;
    node(out).back = [this, ix, iw, ib, io]() {
        const Tensor& g = nodes_[io].grad;
        const Tensor& X2 = nodes_[ix].value;
        const Tensor& W2 = nodes_[iw].value;
        if (Tensor* dx = ACC(ix)) gemm(g, false, W2, false, 1.0, 1.0, *dx);
        if (Tensor* dw = ACC(iw)) gemm(g, true, X2, false, 1.0, 1.0, *dw);
        if (Tensor* db = ACC(ib)) add_inplace(*db, colsum(g));
    };
    return out;
}

Var Tape::matvec(Var A, Var x) {
    const Tensor& Av = node(A).value;
    const Tensor& xv = node(x).value;
    if (Av.rank() != 2 || xv.rank() != 1 || Av.cols() != xv.rows())
        throw std::runtime_error("matvec: shapes " + Av.shape_str() + " " + xv.shape_str());
    Tensor y = Tensor::zeros_vec(Av.rows());
    for (long i = 0; i < Av.rows(); ++i) {
        double s = 0.0;
        const double* row = Av.data() + i * Av.cols();
        for (long j = 0; j < Av.cols(); ++j) s += row[j] * xv.at(j);
        y.at(i) = s;
    }
    int ia = A.id, ix = x.id;
    Var out = make_op(std::move(y), {A, x}, nullptr);
    int io = out.id;
    node(out).back = [this, ia, ix, io]() {
        const Tensor& g = nodes_[io].grad;
        const Tensor& Av2 = nodes_[ia].value;
        const Tensor& xv2 = nodes_[ix].value;
        if (Tensor* da = ACC(ia)) {
            for (long i = 0; i < Av2.rows(); ++i)
                for (long j = 0; j < Av2.cols(); ++j) da->at(i, j) += g.at(i) * xv2.at(j);
        }
        if (Tensor* dx = ACC(ix)) {
            for (long i = 0; i < Av2.rows(); ++i)
                for (long j = 0; j < Av2.cols(); ++j) dx->at(j) += g.at(i) * Av2.at(i, j);
        }
    };
    return out;
}

Var Tape::add(Var a, Var b) {
    Tensor c = mixent::add(node(a).value, node(b).value);
    int ia = a.id, ib = b.id;
    Var out = make_op(std::move(c), {a, b}, nullptr);
    int io = out.id;
    node(out).back = [this, ia, ib, io]() {
        const Tensor& g = nodes_[io].grad;
        if (Tensor* da = ACC(ia)) add_inplace(*da, g);
        if (Tensor* db = ACC(ib)) add_inplace(*db, g);
    };
    return out;
}

Var Tape::sub(Var a, Var b) {
    Tensor c = mixent::sub(node(a).value, node(b).value);
    int ia = a.id, ib = b.id;
    Var out = make_op(std::move(c), {a, b}, nullptr);
    int io = out.id;
    node(out).back = [this, ia, ib, io]() {
        const Tensor& g = nodes_[io].grad;
        if (Tensor* da = ACC(ia)) add_inplace(*da, g);
        if (Tensor* db = ACC(ib)) axpy_inplace(*db, -1.0, g);
    };
    return out;
}

Var Tape::mul(Var a, Var b) {
    Tensor c = mixent::mul(node(a).value, node(b).value);
    int ia = a.id, ib = b.id;
    Var out = make_op(std::move(c), {a, b}, nullptr);
    int io = out.id;
    node(out).back = [this, ia, ib, io]() {
        const Tensor& g = nodes_[io].grad;
        const Tensor& av = nodes_[ia].value;
        const Tensor& bv = nodes_[ib].value;
        if (Tensor* da = ACC(ia)) {
            double* p = da->data();
            for (long i = 0; i < g.size(); ++i) p[i] += g.at(i) * bv.at(i);
        }
        if (Tensor* db = ACC(ib)) {
            double* p = db->data();
            for (long i = 0; i < g.size(); ++i) p[i] += g.at(i) * av.at(i);
        }
    };
    return out;
}

Var Tape::scale(Var a, double s) {
    Tensor c = mixent::scale(node(a).value, s);
    int ia = a.id;
    Var out = make_op(std::move(c), {a}, nullptr);
    int io = out.id;
    node(out).back = [this, ia, io, s]() {
        if (Tensor* da = ACC(ia)) axpy_inplace(*da, s, nodes_[io].grad);
    };
    return out;
}

Var Tape::add_const(Var a, double cst) {
    Tensor c = node(a).value;
    double* p = c.data();
    for (long i = 0; i < c.size(); ++i) p[i] += cst;
    int ia = a.id;
    Var out = make_op(std::move(c), {a}, nullptr);
    int io = out.id;
    node(out).back = [this, ia, io]() {
        if (Tensor* da = ACC(ia)) add_inplace(*da, nodes_[io].grad);
    };
    return out;
}

Var Tape::relu(Var a) {
    Tensor c = node(a).value;
    double* p = c.data();
    for (long i = 0; i < c.size(); ++i) p[i] = p[i] > 0.0 ? p[i] : 0.0;
    int ia = a.id;
    Var out = make_op(std::move(c), {a}, nullptr);
    int io = out.id;
    node(out).back = [this, ia, io]() {
        if (Tensor* da = ACC(ia)) {
            const Tensor& g = nodes_[io].grad;
            const Tensor& x = nodes_[ia].value;
            double* p = da->data();
            for (long i = 0; i < g.size(); ++i)
                if (x.at(i) > 0.0) p[i] += g.at(i);
        }
    };
    return out;
}

Var Tape::elu(Var a) {
    Tensor c = node(a).value;
    double* p = c.data();
    for (long i = 0; i < c.size(); ++i) p[i] = p[i] > 0.0 ? p[i] : std::expm1(p[i]);
    int ia = a.id;
    Var out = make_op(std::move(c), {a}, nullptr);
    int io = out.id;
    node(out).back = [this, ia, io]() {
        if (Tensor* da = ACC(ia)) {
            const Tensor& g = nodes_[io].grad;
            const Tensor& x = nodes_[ia].value;
            const Tensor& y = nodes_[io].value;
            double* p = da->data();
            // d/dx elu = 1 for x > 0, e^x = y + 1 otherwise.
            for (long i = 0; i < g.size(); ++i) p[i] += g.at(i) * (x.at(i) > 0.0 ? 1.0 : y.at(i) + 1.0);
        }
    };
    return out;
}

Var Tape::exp_(Var a) {
    Tensor c = node(a).value;
    double* p = c.data();
    for (long i = 0; i < c.size(); ++i) p[i] = std::exp(p[i]);
    int ia = a.id;
    Var out = make_op(std::move(c), {a}, nullptr);
    int io = out.id;
    node(out).back = [this, ia, io]() {
        if (Tensor* da = ACC(ia)) {
            const Tensor& g = nodes_[io].grad;
            const Tensor& y = nodes_[io].value;
            double* p = da->data();
            for (long i = 0; i < g.size(); ++i) p[i] += g.at(i) * y.at(i);
        }
    };
    return out;
}

Var Tape::log_(Var a) {
    Tensor c = node(a).value;
    double* p = c.data();
    for (long i = 0; i < c.size(); ++i) p[i] = std::log(p[i]);
    int ia = a.id;
    Var out = make_op(std::move(c), {a}, nullptr);
    int io = out.id;
    node(out).back = [this, ia, io]() {
        if (Tensor* da = ACC(ia)) {
            const Tensor& g = nodes_[io].grad;
            const Tensor& x = nodes_[ia].value;
            double* p = da->data();
            for (long i = 0; i < g.size(); ++i) p[i] += g.at(i) / x.at(i);
        }
    };
    return out;
}

Var Tape::sum(Var a) {
    Tensor c = Tensor::scalar(sum_all(node(a).value));
    int ia = a.id;
    Var out = make_op(std::move(c), {a}, nullptr);
    int io = out.id;
    node(out).back = [this, ia, io]() {
        if (Tensor* da = ACC(ia)) {
            const double g = nodes_[io].grad.at(0);
            double* p = da->data();
            for (long i = 0; i < da->size(); ++i) p[i] += g;
        }
    };
    return out;
}

Var Tape::mean(Var a) {
    const long n = node(a).value.size();
    Tensor c = Tensor::scalar(mean_all(node(a).value));
    int ia = a.id;
    Var out = make_op(std::move(c), {a}, nullptr);
    int io = out.id;
    node(out).back = [this, ia, io, n]() {
        if (Tensor* da = ACC(ia)) {
            const double g = nodes_[io].grad.at(0) / static_cast<double>(n);
            double* p = da->data();
            for (long i = 0; i < da->size(); ++i) p[i] += g;
        }
    };
    return out;
}

Var Tape::rowsum(Var a) {
    Tensor c = mixent::rowsum(node(a).value);
    int ia = a.id;
    Var out = make_op(std::move(c), {a}, nullptr);
    int io = out.id;
    node(out).back = [this, ia, io]() {
        if (Tensor* da = ACC(ia)) {
            const Tensor& g = nodes_[io].grad;
            for (long i = 0; i < da->rows(); ++i) {
                double* row = da->data() + i * da->cols();
                for (long j = 0; j < da->cols(); ++j) row[j] += g.at(i);
            }
        }
    };
    return out;
}

Var Tape::l2sq_rows(Var a) {
    const Tensor& x = node(a).value;
    if (x.rank() != 2) throw std::runtime_error("l2sq_rows: expected matrix");
    Tensor c = Tensor::zeros_vec(x.rows());
    for (long i = 0; i < x.rows(); ++i) {
        double s = 0.0;
        const double* row = x.data() + i * x.cols();
        for (long j = 0; j < x.cols(); ++j) s += row[j] * row[j];
        c.at(i) = s;
    }
    int ia = a.id;
    Var out = make_op(std::move(c), {a}, nullptr);
    int io = out.id;
    node(out).back = [this, ia, io]() {
        if (Tensor* da = ACC(ia)) {
            const Tensor& g = nodes_[io].grad;
            const Tensor& x2 = nodes_[ia].value;
            for (long i = 0; i < da->rows(); ++i) {
                double* row = da->data() + i * da->cols();
                const double* xr = x2.data() + i * x2.cols();
                const double gi = 2.0 * g.at(i);
                for (long j = 0; j < da->cols(); ++j) row[j] += gi * xr[j];
            }
        }
    };
    return out;
}

Var Tape::logsumexp_rows(Var a) {
    Tensor c = mixent::logsumexp_rows(node(a).value);
    int ia = a.id;
    Var out = make_op(std::move(c), {a}, nullptr);
    int io = out.id;
    node(out).back = [this, ia, io]() {
        if (Tensor* da = ACC(ia)) {
            const Tensor& g = nodes_[io].grad;
            const Tensor& x = nodes_[ia].value;
            const Tensor& lse = nodes_[io].value;
            for (long i = 0; i < x.rows(); ++i) {
                double* row = da->data() + i * da->cols();
                const double* xr = x.data() + i * x.cols();
                const double gi = g.at(i), li = lse.at(i);
                for (long j = 0; j < x.cols(); ++j) row[j] += gi * std::exp(xr[j] - li);
            }
        }
    };
    return out;
}

Var Tape::logsumexp_vec(Var a) {
    const Tensor& x = node(a).value;
    if (x.rank() != 1) throw std::runtime_error("logsumexp_vec: expected vector");
    Tensor c = Tensor::scalar(mixent::logsumexp(x.data(), x.rows()));
    int ia = a.id;
    Var out = make_op(std::move(c), {a}, nullptr);
    int io = out.id;
    node(out).back = [this, ia, io]() {
        if (Tensor* da = ACC(ia)) {
            const double g = nodes_[io].grad.at(0);
            const double l = nodes_[io].value.at(0);
            const Tensor& x2 = nodes_[ia].value;
            double* p = da->data();
            for (long i = 0; i < x2.rows(); ++i) p[i] += g * std::exp(x2.at(i) - l);
        }
    };
    return out;
}

Var Tape::softmax_rows(Var a) {
    Tensor c = node(a).value;
    softmax_rows_inplace(c);
    int ia = a.id;
    Var out = make_op(std::move(c), {a}, nullptr);
    int io = out.id;
    node(out).back = [this, ia, io]() {
        if (Tensor* da = ACC(ia)) {
            const Tensor& g = nodes_[io].grad;
            const Tensor& s = nodes_[io].value;
            // ds_k/dx_j = s_k (delta_kj - s_j) => dx = s .* (g - <g,s>)
            for (long i = 0; i < s.rows(); ++i) {
                const double* gr = g.data() + i * g.cols();
                const double* sr = s.data() + i * s.cols();
                double dotv = 0.0;
                for (long j = 0; j < s.cols(); ++j) dotv += gr[j] * sr[j];
                double* dr = da->data() + i * da->cols();
                for (long j = 0; j < s.cols(); ++j) dr[j] += sr[j] * (gr[j] - dotv);
            }
        }
    };
    return out;
}

Var Tape::col(Var a, long j) {
    const Tensor& x = node(a).value;
    if (x.rank() != 2 || j < 0 || j >= x.cols()) throw std::runtime_error("col: bad index");
    Tensor c = Tensor::zeros_vec(x.rows());
    for (long i = 0; i < x.rows(); ++i) c.at(i) = x.at(i, j);
    int ia = a.id;
    Var out = make_op(std::move(c), {a}, nullptr);
    int io = out.id;
    node(out).back = [this, ia, io, j]() {
        if (Tensor* da = ACC(ia)) {
            const Tensor& g = nodes_[io].grad;
            for (long i = 0; i < da->rows(); ++i) da->at(i, j) += g.at(i);
        }
    };
    return out;
}

Var Tape::row(Var a, long i) {
    const Tensor& x = node(a).value;
    if (x.rank() != 2 || i < 0 || i >= x.rows()) throw std::runtime_error("row: bad index");
    Tensor c = Tensor::zeros_vec(x.cols());
    for (long j = 0; j < x.cols(); ++j) c.at(j) = x.at(i, j);
    int ia = a.id;
    Var out = make_op(std::move(c), {a}, nullptr);
    int io = out.id;
    node(out).back = [this, ia, io, i]() {
        if (Tensor* da = ACC(ia)) {
            const Tensor& g = nodes_[io].grad;
            for (long j = 0; j < da->cols(); ++j) da->at(i, j) += g.at(j);
        }
    };
    return out;
}

Var Tape::element(Var a, long i) {
    const Tensor& x = node(a).value;
    if (x.rank() != 1 || i < 0 || i >= x.rows()) throw std::runtime_error("element: bad index");
    int ia = a.id;
    Var out = make_op(Tensor::scalar(x.at(i)), {a}, nullptr);
    int io = out.id;
    node(out).back = [this, ia, io, i]() {
        if (Tensor* da = ACC(ia)) da->at(i) += nodes_[io].grad.at(0);
    };
    return out;
}

Var Tape::concat_cols(const std::vector<Var>& cols) {
    if (cols.empty()) throw std::runtime_error("concat_cols: empty");
    const long n = node(cols[0]).value.rows();
    const long k = static_cast<long>(cols.size());
    Tensor c = Tensor::zeros(n, k);
    bool tracked = false;
    for (long j = 0; j < k; ++j) {
        const Tensor& v = node(cols[j]).value;
        if (v.rank() != 1 || v.rows() != n) throw std::runtime_error("concat_cols: column shape mismatch");
        for (long i = 0; i < n; ++i) c.at(i, j) = v.at(i);
        tracked = tracked || node(cols[j]).tracked;
    }
    std::vector<int> ids(k);
    for (long j = 0; j < k; ++j) ids[j] = cols[j].id;
    Var out = make(std::move(c), tracked, nullptr);
    int io = out.id;
    if (tracked) {
        node(out).back = [this, ids, io]() {
            const Tensor& g = nodes_[io].grad;
            for (size_t j = 0; j < ids.size(); ++j) {
                if (Tensor* da = ACC(ids[j])) {
                    for (long i = 0; i < g.rows(); ++i) da->at(i) += g.at(i, static_cast<long>(j));
                }
            }
        };
    }
    return out;
}

Var Tape::concat_rows(const std::vector<Var>& mats) {
    if (mats.empty()) throw std::runtime_error("concat_rows: empty");
    const long m = node(mats[0]).value.cols();
    long total = 0;
    bool tracked = false;
    for (Var v : mats) {
        const Tensor& t = node(v).value;
        if (t.rank() != 2 || t.cols() != m) throw std::runtime_error("concat_rows: column count mismatch");
        total += t.rows();
        tracked = tracked || node(v).tracked;
    }
    Tensor c = Tensor::zeros(total, m);
    std::vector<int> ids;
    std::vector<long> offsets;
    long off = 0;
    for (Var v : mats) {
        const Tensor& t = node(v).value;
        for (long i = 0; i < t.rows(); ++i)
            for (long j = 0; j < m; ++j) c.at(off + i, j) = t.at(i, j);
        ids.push_back(v.id);
        offsets.push_back(off);
        off += t.rows();
    }
    Var out = make(std::move(c), tracked, nullptr);
    int io = out.id;
    if (tracked) {
        node(out).back = [this, ids, offsets, io]() {
            const Tensor& g = nodes_[io].grad;
            for (size_t b = 0; b < ids.size(); ++b) {
                if (Tensor* da = ACC(ids[b])) {
                    const long off2 = offsets[b];
                    for (long i = 0; i < da->rows(); ++i)
                        for (long j = 0; j < da->cols(); ++j) da->at(i, j) += g.at(off2 + i, j);
                }
            }
        };
    }
    return out;
}

Var Tape::slice_rows(Var a, long r0, long r1) {
    const Tensor& x = node(a).value;
    if (x.rank() != 2 || r0 < 0 || r1 > x.rows() || r0 >= r1) throw std::runtime_error("slice_rows: bad range");
    Tensor c = Tensor::zeros(r1 - r0, x.cols());
    for (long i = r0; i < r1; ++i)
        for (long j = 0; j < x.cols(); ++j) c.at(i - r0, j) = x.at(i, j);
    int ia = a.id;
    Var out = make_op(std::move(c), {a}, nullptr);
    int io = out.id;
    node(out).back = [this, ia, io, r0]() {
        if (Tensor* da = ACC(ia)) {
            const Tensor& g = nodes_[io].grad;
            for (long i = 0; i < g.rows(); ++i)
                for (long j = 0; j < g.cols(); ++j) da->at(r0 + i, j) += g.at(i, j);
        }
    };
    return out;
}

Var Tape::gather_rows(Var a, std::vector<long> idx) {
    const Tensor& x = node(a).value;
    const long k = static_cast<long>(idx.size());
    Tensor c;
    if (x.rank() == 2) {
        c = Tensor::zeros(k, x.cols());
        for (long r = 0; r < k; ++r) {
            const long i = idx[r];
            if (i < 0 || i >= x.rows()) throw std::runtime_error("gather_rows: index out of range");
            for (long j = 0; j < x.cols(); ++j) c.at(r, j) = x.at(i, j);
        }
    } else if (x.rank() == 1) {
        c = Tensor::zeros_vec(k);
        for (long r = 0; r < k; ++r) {
            const long i = idx[r];
            if (i < 0 || i >= x.rows()) throw std::runtime_error("gather_rows: index out of range");
            c.at(r) = x.at(i);
        }
    } else {
        throw std::runtime_error("gather_rows: expected vector or matrix");
    }
    int ia = a.id;
    Var out = make_op(std::move(c), {a}, nullptr);
    int io = out.id;
    node(out).back = [this, ia, io, idx = std::move(idx)]() {
        if (Tensor* da = ACC(ia)) {
            const Tensor& g = nodes_[io].grad;
            if (da->rank() == 2) {
                for (size_t r = 0; r < idx.size(); ++r)
                    for (long j = 0; j < da->cols(); ++j) da->at(idx[r], j) += g.at(static_cast<long>(r), j);
            } else {
                for (size_t r = 0; r < idx.size(); ++r) da->at(idx[r]) += g.at(static_cast<long>(r));
            }
        }
    };
    return out;
}

Var Tape::scatter_vec(Var a, std::vector<long> idx, long n) {
    const Tensor& x = node(a).value;
    if (x.rank() != 1 || x.rows() != static_cast<long>(idx.size()))
        throw std::runtime_error("scatter_vec: index/value length mismatch");
    Tensor c = Tensor::zeros_vec(n);
    for (size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] < 0 || idx[r] >= n) throw std::runtime_error("scatter_vec: index out of range");
        c.at(idx[r]) += x.at(static_cast<long>(r));
    }
    int ia = a.id;
    Var out = make_op(std::move(c), {a}, nullptr);
    int io = out.id;
    node(out).back = [this, ia, io, idx = std::move(idx)]() {
        if (Tensor* da = ACC(ia)) {
            const Tensor& g = nodes_[io].grad;
            for (size_t r = 0; r < idx.size(); ++r) da->at(static_cast<long>(r)) += g.at(idx[r]);
        }
    };
    return out;
}

Var Tape::add_rowvec(Var X, Var b) {
    const Tensor& x = node(X).value;
    const Tensor& bv = node(b).value;
    if (x.rank() != 2 || bv.rank() != 1 || bv.rows() != x.cols()) throw std::runtime_error("add_rowvec: shapes");
    Tensor c = x;
    for (long i = 0; i < c.rows(); ++i)
        for (long j = 0; j < c.cols(); ++j) c.at(i, j) += bv.at(j);
    int ix = X.id, ib = b.id;
    Var out = make_op(std::move(c), {X, b}, nullptr);
    int io = out.id;
    node(out).back = [this, ix, ib, io]() {
        const Tensor& g = nodes_[io].grad;
        if (Tensor* dx = ACC(ix)) add_inplace(*dx, g);
        if (Tensor* db = ACC(ib)) add_inplace(*db, colsum(g));
    };
    return out;
}

Var Tape::sub_rowvec(Var X, Var b) {
    const Tensor& x = node(X).value;
    const Tensor& bv = node(b).value;
    if (x.rank() != 2 || bv.rank() != 1 || bv.rows() != x.cols()) throw std::runtime_error("sub_rowvec: shapes");
    Tensor c = x;
    for (long i = 0; i < c.rows(); ++i)
        for (long j = 0; j < c.cols(); ++j) c.at(i, j) -= bv.at(j);
    int ix = X.id, ib = b.id;
    Var out = make_op(std::move(c), {X, b}, nullptr);
    int io = out.id;
    node(out).back = [this, ix, ib, io]() {
        const Tensor& g = nodes_[io].grad;
        if (Tensor* dx = ACC(ix)) add_inplace(*dx, g);
        if (Tensor* db = ACC(ib)) axpy_inplace(*db, -1.0, colsum(g));
    };
    return out;
}

Var Tape::mul_rowvec(Var X, Var b) {
    const Tensor& x = node(X).value;
    const Tensor& bv = node(b).value;
    if (x.rank() != 2 || bv.rank() != 1 || bv.rows() != x.cols()) throw std::runtime_error("mul_rowvec: shapes");
    Tensor c = x;
    for (long i = 0; i < c.rows(); ++i)
        for (long j = 0; j < c.cols(); ++j) c.at(i, j) *= bv.at(j);
    int ix = X.id, ib = b.id;
    Var out = make_op(std::move(c), {X, b}, nullptr);
    int io = out.id;
    node(out).back = [this, ix, ib, io]() {
        const Tensor& g = nodes_[io].grad;
        const Tensor& x2 = nodes_[ix].value;
        const Tensor& b2 = nodes_[ib].value;
        if (Tensor* dx = ACC(ix)) {
            for (long i = 0; i < g.rows(); ++i)
                for (long j = 0; j < g.cols(); ++j) dx->at(i, j) += g.at(i, j) * b2.at(j);
        }
        if (Tensor* db = ACC(ib)) {
            for (long i = 0; i < g.rows(); ++i)
                for (long j = 0; j < g.cols(); ++j) db->at(j) += g.at(i, j) * x2.at(i, j);
        }
    };
    return out;
}

Var Tape::add_scalar_var(Var a, Var s) {
    const Tensor& sv = node(s).value;
    if (sv.size() != 1) throw std::runtime_error("add_scalar_var: s must be scalar");
    Tensor c = node(a).value;
    double* p = c.data();
    for (long i = 0; i < c.size(); ++i) p[i] += sv.at(0);
    int ia = a.id, is = s.id;
    Var out = make_op(std::move(c), {a, s}, nullptr);
    int io = out.id;
    node(out).back = [this, ia, is, io]() {
        const Tensor& g = nodes_[io].grad;
        if (Tensor* da = ACC(ia)) add_inplace(*da, g);
        if (Tensor* ds = ACC(is)) ds->at(0) += sum_all(g);
    };
    return out;
}

Var Tape::sub_scalar_var(Var a, Var s) {
    const Tensor& sv = node(s).value;
    if (sv.size() != 1) throw std::runtime_error("sub_scalar_var: s must be scalar");
    Tensor c = node(a).value;
    double* p = c.data();
    for (long i = 0; i < c.size(); ++i) p[i] -= sv.at(0);
    int ia = a.id, is = s.id;
    Var out = make_op(std::move(c), {a, s}, nullptr);
    int io = out.id;
    node(out).back = [this, ia, is, io]() {
        const Tensor& g = nodes_[io].grad;
        if (Tensor* da = ACC(ia)) add_inplace(*da, g);
        if (Tensor* ds = ACC(is)) ds->at(0) -= sum_all(g);
    };
    return out;
}

Var Tape::dot(Var a, Var b) {
    const Tensor& av = node(a).value;
    const Tensor& bv = node(b).value;
    if (av.rank() != 1 || !av.same_shape(bv)) throw std::runtime_error("dot: expects equal-length vectors");
    double s = 0.0;
    for (long i = 0; i < av.rows(); ++i) s += av.at(i) * bv.at(i);
    int ia = a.id, ib = b.id;
    Var out = make_op(Tensor::scalar(s), {a, b}, nullptr);
    int io = out.id;
    node(out).back = [this, ia, ib, io]() {
        const double g = nodes_[io].grad.at(0);
        const Tensor& av2 = nodes_[ia].value;
        const Tensor& bv2 = nodes_[ib].value;
        if (Tensor* da = ACC(ia)) axpy_inplace(*da, g, bv2);
        if (Tensor* db = ACC(ib)) axpy_inplace(*db, g, av2);
    };
    return out;
}

Var Tape::tril_exp_diag(Var packed, int d) {
    const Tensor& p = node(packed).value;
    const long len = static_cast<long>(d) * (d + 1) / 2;
    if (p.rank() != 1 || p.rows() != len) throw std::runtime_error("tril_exp_diag: packed length mismatch");
    Tensor L = Tensor::zeros(d, d);
    long k = 0;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j <= i; ++j, ++k) L.at(i, j) = (i == j) ? std::exp(p.at(k)) : p.at(k);
    int ip = packed.id;
    Var out = make_op(std::move(L), {packed}, nullptr);
    int io = out.id;
    node(out).back = [this, ip, io, d]() {
        if (Tensor* dp = ACC(ip)) {
            const Tensor& g = nodes_[io].grad;
            const Tensor& L2 = nodes_[io].value;
            long k2 = 0;
            for (int i = 0; i < d; ++i)
                for (int j = 0; j <= i; ++j, ++k2)
                    dp->at(k2) += (i == j) ? g.at(i, j) * L2.at(i, j) : g.at(i, j);
        }
    };
    return out;
}

#undef ACC

void Tape::backward(Var out) {
    if (consumed_) throw std::runtime_error("tape: backward called twice on the same tape");
    consumed_ = true;
    Node& o = node(out);
    if (o.value.size() != 1) throw std::runtime_error("tape: backward requires a scalar output");
    if (!o.tracked) throw std::runtime_error("tape: output does not depend on any tracked node");
    ensure_grad(out.id).at(0) = 1.0;
    for (int i = out.id; i >= 0; --i) {
        Node& n = nodes_[i];
        if (n.tracked && n.grad.size() > 0 && n.back) n.back();
    }
}

}  // namespace mixent
