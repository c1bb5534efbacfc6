#pragma once

#include <vector>

#include "mixent/gibbs.hpp"
#include "mixent/rng.hpp"
#include "mixent/tensor.hpp"

namespace mixent {

// Rejection sampler for the tilted density p ~ q * e^T with proposals drawn
// from the base q itself: a proposal x is kept with probability
// min(1, e^{T(x)} / C). The envelope constant C is calibrated empirically as
// (1 + margin) times the largest e^T seen on a calibration set, so points
// beyond that maximum can exceed the envelope; such proposals are accepted
// outright and counted, never hidden.
struct RejectionSampler {
    const GibbsModel* model = nullptr;
    double c_tilde = 1.0;  // envelope constant C
    double margin = 0.0;   // safety factor applied to the calibration maximum
};

RejectionSampler calibrate_envelope(const GibbsModel& model, const Tensor& calibration,
                                    double margin = 0.05);

struct RejectionResult {
    Tensor samples;                       // [accepted, d]
    long proposals = 0;                   // base draws examined
    long accepted = 0;
    long envelope_violations = 0;         // proposals with e^T above the envelope
    bool low_acceptance_warning = false;  // acceptance rate fell below 1e-4
};

// Draws until `count` acceptances or `max_proposals` examined proposals,
// whichever comes first; count <= 0 runs the full proposal budget. Each
// examined proposal consumes exactly one uniform draw, so a fixed seed fixes
// the entire accept/reject pattern.
RejectionResult rejection_sample(const RejectionSampler& sampler, long count, long max_proposals,
                                 Rng& rng);

// Euler-Maruyama discretization of the overdamped Langevin diffusion
//   dX_t = grad log g(X_t) dt + sqrt(2 / beta) dW_t,
// whose invariant density at beta = 1 is the normalized g = q * e^T. Larger
// beta damps the noise and concentrates chains near the modes.
struct LangevinConfig {
    double beta = 1.0;     // inverse temperature
    double dt = 1e-3;      // discretization step
    double horizon = 5.0;  // total simulated time; steps = round(horizon / dt)
    long traj_stride = 0;  // snapshot cadence in steps; 0 disables snapshots
};

struct LangevinResult {
    Tensor terminal;   // [surviving chains, d]
    long dropped = 0;  // chains that left the finite range and were excluded
    long steps = 0;
};

// Runs X0.rows() chains from the given start states. Noise is drawn for every
// chain at every step, dead chains included, so the random stream — and hence
// every surviving chain's path — does not depend on which chains diverge.
// A chain whose state goes non-finite (or beyond 1e100 in any coordinate, the
// precursor to overflow) is pinned at zero, skipped from then on, and left out
// of the terminal matrix. With traj_stride > 0, `trajectory` receives the full
// state at steps 0, stride, 2*stride, ... plus the terminal state.
LangevinResult langevin_simulate(const GibbsModel& model, const LangevinConfig& config,
                                 const Tensor& X0, Rng& rng,
                                 std::vector<Tensor>* trajectory = nullptr);

// Convenience overload: starts the chains from base-distribution draws.
LangevinResult langevin_simulate(const GibbsModel& model, const LangevinConfig& config, long chains,
                                 Rng& rng, std::vector<Tensor>* trajectory = nullptr);

}  // namespace mixent
