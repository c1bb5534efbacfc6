#include "mixent/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mixent {

GibbsModel::GibbsModel(const GaussianMixture& base, const CorrectionNetwork* correction)
    : base_(&base), correction_(correction) {
    if (correction_ != nullptr &&
        (correction_->dim() != base.dim() ||
         (correction_->config().variant == CorrectionConfig::Variant::mixture &&
          correction_->components() != base.components())))
        throw std::runtime_error("gibbs: correction does not match the base density");
}

Tensor GibbsModel::log_unnormalized(const Tensor& X) const {
    Tensor out = base_->log_density(X);
    if (correction_ != nullptr) {
        Tensor tv = correction_->t_values(X, base_);
        for (long i = 0; i < out.rows(); ++i) out.at(i) += tv.at(i);
    }
    return out;
}

GibbsEval GibbsModel::value_and_grad(const Tensor& X) const {
    if (X.rank() != 2 || X.cols() != base_->dim())
        throw std::runtime_error("gibbs value_and_grad: bad input shape " + X.shape_str());
    const long n = X.rows(), d = X.cols();
    GibbsEval ev;
    ev.log_density = Tensor::zeros_vec(n);
    ev.grad = Tensor::zeros(n, d);

    // Row gradients decouple, so one backward pass through the row sum
    // yields every d(log g)/dx at once.
    const long chunk = 2048;
    for (long start = 0; start < n; start += chunk) {
        const long stop = std::min(n, start + chunk);
        Tensor block = Tensor::zeros(stop - start, d);
        for (long i = start; i < stop; ++i)
            for (long j = 0; j < d; ++j) block.at(i - start, j) = X.at(i, j);

        Tape t;
        Var x = t.leaf(std::move(block));
        auto mv = base_->vars(t, false);
        Var total = base_->log_density_graph(t, mv, x);
        if (correction_ != nullptr) {
            auto bound = bind_params(t, correction_->params(), false);
            total = t.add(total, correction_->build_t(t, bound, x, base_));
        }
        const Tensor& vals = t.val(total);
        for (long i = start; i < stop; ++i) ev.log_density.at(i) = vals.at(i - start);
        t.backward(t.sum(total));
        const Tensor& g = t.grad(x);
        for (long i = start; i < stop; ++i)
            for (long j = 0; j < d; ++j) ev.grad.at(i, j) = g.at(i - start, j);
    }
    return ev;
}

Tensor GibbsModel::exp_correction(const Tensor& X) const {
    if (correction_ == nullptr) {
        Tensor ones = Tensor::zeros_vec(X.rows());
        for (long i = 0; i < ones.rows(); ++i) ones.at(i) = 1.0;
        return ones;
    }
    Tensor tv = correction_->t_values(X, base_);
    for (long i = 0; i < tv.rows(); ++i) tv.at(i) = std::exp(tv.at(i));
    return tv;
}

}  // namespace mixent
