#pragma once

#include "mixent/correction.hpp"
#include "mixent/gmm.hpp"
#include "mixent/tensor.hpp"

namespace mixent {

// Unnormalized target density g(x) = q(x) e^{T(x)}: the mixture base tilted
// by a correction. A null correction means T == 0, i.e. the base itself.
// Samplers only ever need log g and its input gradient, so normalization is
// never computed.
struct GibbsEval {
    Tensor log_density;  // log q + T, per row (unnormalized)
    Tensor grad;         // d(log q + T)/dx, [n, d]
};

class GibbsModel {
public:
    GibbsModel(const GaussianMixture& base, const CorrectionNetwork* correction);

    const GaussianMixture& base() const { return *base_; }
    const CorrectionNetwork* correction() const { return correction_; }
    int dim() const { return base_->dim(); }

    Tensor log_unnormalized(const Tensor& X) const;

    // Values plus input gradients (for gradient-based samplers), chunked.
    GibbsEval value_and_grad(const Tensor& X) const;

    // e^{T(x)} per row; all ones without a correction.
    Tensor exp_correction(const Tensor& X) const;

private:
    const GaussianMixture* base_;
    const CorrectionNetwork* correction_;
};

}  // namespace mixent
