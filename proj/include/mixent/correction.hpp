#pragma once

#include <optional>
#include <vector>

#include "mixent/adam.hpp"
#include "mixent/gmm.hpp"
#include "mixent/rng.hpp"
#include "mixent/tape.hpp"

namespace mixent {

// Corrective network T(x) paired with a frozen mixture base q. The final
// head is f(x) = elu(z) + 1 + eps > 0 with T = log f (plus a trainable
// log-space bias), so exp(T) grows at most linearly in the pre-activation
// and the variational objective never overflows.
struct CorrectionConfig {
    enum class Variant { plain, mixture } variant = Variant::mixture;
    std::vector<int> widths{500, 500};  // shared trunk; last entry is the penultimate dim
    double epsilon = 1e-6;
    // Mixture variant: rows route only through components whose posterior
    // mass exceeds this cutoff. A skipped term is bounded by
    // cutoff * |s_i|, far below estimate tolerances; 0 disables skipping.
    double relevance_cutoff = 1e-12;
    // Include the precision normalizer in the relevance scores (true
    // posterior); false ranks components by w_i exp(-0.5||L_i(x-mu_i)||^2).
    bool relevance_det_term = true;
};

class CorrectionNetwork {
public:
    // dim: data dimension; components: M of the paired base (plain variant
    // ignores it). Trunk weights are He-initialized from rng; the output
    // head starts at zero so T == log(1 + eps) everywhere.
    CorrectionNetwork(int dim, int components, CorrectionConfig cfg, Rng& rng);

    const CorrectionConfig& config() const { return cfg_; }
    int dim() const { return d_; }
    int components() const { return M_; }
    ParameterStore& params() { return params_; }
    const ParameterStore& params() const { return params_; }

    // Build T(x) on a tape; `bound` must come from bind_params on params().
    // The mixture variant reads the frozen base through constants; x may be
    // a leaf (gradients w.r.t. inputs flow for samplers).
    Var build_t(Tape& t, const std::vector<Var>& bound, Var x, const GaussianMixture* base) const;

    // Numeric T values, chunked.
    Tensor t_values(const Tensor& X, const GaussianMixture* base) const;

private:
    CorrectionConfig cfg_;
    int d_ = 0, M_ = 0;
    ParameterStore params_;
    std::vector<long> trunk_w_, trunk_b_;  // slot indices
    std::vector<long> proj_, head_;        // per-component slots (mixture variant)
    long head_w_ = -1, head_bias_ = -1, t_bias_ = -1;
};

// Exponential-moving-average state for the normalizer mean_Q[e^T].
struct DvState {
    double ema = 0.0;
    bool initialized = false;
    double decay = 0.99;
};

// Value of the variational objective mean_P[T] - log mean_Q[e^T] on full
// tensors (chunked, stabilized through log-sum-exp).
struct DvEstimate {
    double dv = 0.0;
    double mean_t_p = 0.0;
    double log_mean_exp_t_q = 0.0;
    double se = 0.0;  // standard error of the P-side average
};
DvEstimate dv_estimate(const CorrectionNetwork& net, const GaussianMixture& base, const Tensor& P,
                       const Tensor& Q);

// One optimizer step on batches xp ~ P, xq ~ Q. Updates the EMA state first
// (state.ema <- decay*ema + (1-decay)*batch mean, seeded on first use), then
// follows the gradient of  mean_Q[e^T]/ema - mean_P[T], whose gradient equals
// the bias-corrected estimate grad(mean_Q e^T)/ema - grad(mean_P T). With
// decay = 0 this reduces to the plain gradient of -(mean_P T - log mean_Q e^T).
// Returns the batch objective value (mean_P T - log mean_Q e^T).
double dv_gradient_step(CorrectionNetwork& net, const GaussianMixture& base, const Tensor& xp,
                        const Tensor& xq, DvState& state, const AdamConfig& adam);

struct DvTrainOptions {
    int epochs = 100;
    long batch_size = 1000;
    AdamConfig adam;
    double ema_decay = 0.99;
    // Per-epoch validation: -1 evaluates the full val set, 0 skips, k > 0
    // evaluates on the first k validation rows (cheap progress curves).
    long curve_eval = -1;
    double base_val_ce = 0.0;  // adds the entropy_estimate curve column
    // Deviation mode: redraw the reference set from the base at the start of
    // every epoch after the first (default keeps the caller's fixed draw).
    bool resample_q = false;
};

// Variational training against a fixed sample set Q from the frozen base
// (drawn once by the caller). Returns one record per epoch; train_loss is
// the mean batch value of -(mean_P T - log mean_Q e^T).
std::vector<EpochRecord> train_dv(CorrectionNetwork& net, const GaussianMixture& base,
                                  const Tensor& train_p, const Tensor& q_samples, const Tensor& val_p,
                                  const Tensor& eval_q, const DvTrainOptions& opts, Rng& rng);

}  // namespace mixent
