#pragma once

#include <vector>

#include "mixent/adam.hpp"
#include "mixent/rng.hpp"
#include "mixent/tape.hpp"
#include "mixent/tensor.hpp"

namespace mixent {

// One row of a training curve; fields that a phase does not produce are NaN.
struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double dv_estimate = 0.0;       // NaN during base-density training
    double entropy_estimate = 0.0;  // current entropy bound on validation data
    double seconds = 0.0;
};

struct MixtureTrainOptions {
    int epochs = 50;
    long batch_size = 1000;
    AdamConfig adam;
    bool record_val = true;
};

// Gaussian mixture with full or diagonal precision parametrization.
//
// Component j has weight w_j = softmax(weights)_j, mean mu_j, and precision
// Lambda_j = L_j^T L_j where L_j is lower triangular with positive diagonal
// (diagonal entries are stored as logs, off-diagonals raw). Then
//
//   log N_j(x) = -(d/2) log 2pi + sum_k log (L_j)_kk - 0.5 ||L_j (x - mu_j)||^2
//
// and sampling uses x = mu_j + L_j^{-1} z with standard normal z, which has
// covariance (L_j^T L_j)^{-1} as required. In diagonal mode only the log
// diagonal is stored.
class GaussianMixture {
public:
    GaussianMixture(int components, int dim, bool diagonal);

    // Means from M distinct random data points, unit weights, and precision
    // diag(1/std) from the per-dimension standard deviation of the data.
    static GaussianMixture init_from_data(const Tensor& X, int components, bool diagonal, Rng& rng);

    int components() const { return M_; }
    int dim() const { return d_; }
    bool diagonal() const { return diagonal_; }
    long packed_scale_len() const { return diagonal_ ? d_ : static_cast<long>(d_) * (d_ + 1) / 2; }

    ParameterStore& params() { return params_; }
    const ParameterStore& params() const { return params_; }

    // Tape graph pieces. MixtureVars ties the slots to tape nodes so callers
    // can read gradients after backward().
    struct MixtureVars {
        Var weights, means, scales;
    };
    MixtureVars vars(Tape& t, bool trainable) const;
    // Per-component scores log w_j + log N_j(x): [n, M].
    Var component_scores(Tape& t, const MixtureVars& mv, Var x) const;
    Var log_density_graph(Tape& t, const MixtureVars& mv, Var x) const;

    // Numeric evaluation (chunked internally; no gradient state).
    Tensor log_density(const Tensor& X) const;
    // Posterior component probabilities. With with_det_term=false the scores
    // omit the normalizer term sum_k log (L_j)_kk, i.e. components are ranked
    // only by w_j exp(-0.5 ||L_j (x-mu_j)||^2).
    Tensor responsibilities(const Tensor& X, bool with_det_term = true) const;
    Tensor sample(long n, Rng& rng) const;
    double entropy_upper_estimate(const Tensor& X) const;  // mean of -log q

    // Minibatch cross-entropy training (minimizes mean -log q on train).
    std::vector<EpochRecord> train_cross_entropy(const Tensor& train, const Tensor& val,
                                                 const MixtureTrainOptions& opts, Rng& rng);

private:
    int M_ = 0, d_ = 0;
    bool diagonal_ = false;
    ParameterStore params_;
    std::vector<long> diag_packed_idx_;  // positions of diagonal entries in a packed row
};

}  // namespace mixent
