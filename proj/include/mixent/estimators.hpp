#pragma once

#include <functional>
#include <string>

#include "mixent/correction.hpp"
#include "mixent/gmm.hpp"
#include "mixent/tensor.hpp"

namespace mixent {

struct EntropyEstimate {
    double value = 0.0;
    double standard_error = 0.0;
    std::string method;
    long n = 0, m = 0;  // evaluation sample counts (m = reference side, if any)
    double seconds = 0.0;
};

// Batch log-density callback: rows in, one log-density per row out.
using LogDensityFn = std::function<Tensor(const Tensor&)>;

// Monte Carlo oracle: mean of -log p over exact-density samples.
EntropyEstimate oracle_mc(const LogDensityFn& log_density, const Tensor& samples);

// Parzen plug-in with an isotropic Gaussian kernel of bandwidth h. The sum
// over train kernels is computed under a stabilized log-sum-exp; callers
// supply disjoint train/eval draws.
EntropyEstimate oracle_kde(const Tensor& train, const Tensor& eval, double h);

// Kozachenko-Leonenko: psi(n) - psi(k) + log V_d + (d/n) sum_i log eps_i with
// eps_i the distance from point i to its k-th neighbor.
EntropyEstimate estimate_knn_kl(const Tensor& samples, int k);

// Combined estimate: cross-entropy of the base minus the variational
// correction, with the standard error taken over the per-sample P-side terms
// -log q(x) - T(x). The callback form lets tests substitute exact densities;
// t_fn may be null for T == 0.
EntropyEstimate estimate_remedi(const LogDensityFn& log_q, const LogDensityFn& t_fn,
                                const Tensor& eval_p, const Tensor& eval_q);
EntropyEstimate estimate_remedi(const GaussianMixture& base, const CorrectionNetwork* net,
                                const Tensor& eval_p, const Tensor& eval_q);

}  // namespace mixent
