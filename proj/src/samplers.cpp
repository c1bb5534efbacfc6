#include "mixent/samplers.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mixent {

RejectionSampler calibrate_envelope(const GibbsModel& model, const Tensor& calibration,
                                    double margin) {
    if (margin < 0.0) throw std::runtime_error("envelope margin must be nonnegative");
    if (calibration.rank() != 2 || calibration.rows() < 1 ||
        calibration.cols() != model.dim())
        throw std::runtime_error("envelope calibration needs a nonempty [n, " +
                                 std::to_string(model.dim()) + "] sample matrix");
    for (long i = 0; i < calibration.size(); ++i)
        if (!std::isfinite(calibration.at(i)))
            throw std::runtime_error("calibration row " + std::to_string(i / model.dim()) +
                                     " is not finite");

    const Tensor ec = model.exp_correction(calibration);
    double peak = 0.0;
    for (long i = 0; i < ec.size(); ++i) {
        if (!std::isfinite(ec.at(i)))
            throw std::runtime_error("correction is not finite on calibration row " +
                                     std::to_string(i));
        peak = std::max(peak, ec.at(i));
    }
    if (peak <= 0.0)
        throw std::runtime_error("envelope collapsed: e^T is zero on the whole calibration set");

    RejectionSampler s;
    s.model = &model;
    s.margin = margin;
    s.c_tilde = (1.0 + margin) * peak;
    return s;
}

RejectionResult rejection_sample(const RejectionSampler& sampler, long count, long max_proposals,
                                 Rng& rng) {
    if (sampler.model == nullptr) throw std::runtime_error("rejection sampler is not calibrated");
    if (max_proposals < 1) throw std::runtime_error("proposal budget must be at least 1");
    const GibbsModel& model = *sampler.model;
    const int d = model.dim();
    const double c = sampler.c_tilde;

    RejectionResult res;
    std::vector<double> kept;
    const long batch_cap = 8192;
    while (res.proposals < max_proposals && (count <= 0 || res.accepted < count)) {
        const long batch = std::min(batch_cap, max_proposals - res.proposals);
        const Tensor X = model.base().sample(batch, rng);
        const Tensor ec = model.exp_correction(X);
        for (long i = 0; i < batch && (count <= 0 || res.accepted < count); ++i) {
            ++res.proposals;
            const double u = rng.uniform();
            if (ec.at(i) > c) ++res.envelope_violations;
            // u < e^T / C, written without the division so an overflowed e^T
            // still accepts (it is above the envelope by definition).
            if (u * c < ec.at(i)) {
                for (int j = 0; j < d; ++j) kept.push_back(X.at(i, j));
                ++res.accepted;
            }
        }
    }
    res.samples = Tensor::from_matrix(res.accepted, d, std::move(kept));
    res.low_acceptance_warning =
        static_cast<double>(res.accepted) < 1e-4 * static_cast<double>(res.proposals);
    return res;
}

LangevinResult langevin_simulate(const GibbsModel& model, const LangevinConfig& config,
                                 const Tensor& X0, Rng& rng, std::vector<Tensor>* trajectory) {
    if (config.beta <= 0.0 || config.dt <= 0.0 || config.horizon <= 0.0)
        throw std::runtime_error("Langevin config needs positive beta, dt, and horizon");
    if (X0.rank() != 2 || X0.rows() < 1 || X0.cols() != model.dim())
        throw std::runtime_error("Langevin start states must be a nonempty [chains, " +
                                 std::to_string(model.dim()) + "] matrix");
    const long steps = std::llround(config.horizon / config.dt);
    if (steps < 1) throw std::runtime_error("horizon is shorter than half a step");

    const long n = X0.rows();
    const int d = model.dim();
    Tensor X = X0;
    std::vector<char> alive(n, 1);
    LangevinResult res;
    res.steps = steps;

    auto pin_if_diverged = [&](long i) {
        bool bad = false;
        for (int j = 0; j < d; ++j) {
            const double v = X.at(i, j);
            if (!std::isfinite(v) || std::abs(v) > 1e100) bad = true;
        }
        if (bad) {
            for (int j = 0; j < d; ++j) X.at(i, j) = 0.0;
            alive[i] = 0;
            ++res.dropped;
        }
    };
    for (long i = 0; i < n; ++i) pin_if_diverged(i);

    const double noise_scale = std::sqrt(2.0 * config.dt / config.beta);
    Tensor xi = Tensor::zeros(n, d);
    for (long step = 0; step < steps; ++step) {
        if (trajectory != nullptr && config.traj_stride > 0 && step % config.traj_stride == 0)
            trajectory->push_back(X);
        const GibbsEval ev = model.value_and_grad(X);
        rng.fill_normal(xi);
        for (long i = 0; i < n; ++i) {
            if (!alive[i]) continue;
            for (int j = 0; j < d; ++j)
                X.at(i, j) += ev.grad.at(i, j) * config.dt + noise_scale * xi.at(i, j);
            pin_if_diverged(i);
        }
    }
    if (trajectory != nullptr && config.traj_stride > 0) trajectory->push_back(X);

    long survivors = 0;
    for (long i = 0; i < n; ++i) survivors += alive[i];
    res.terminal = Tensor::zeros(survivors, d);
    long row = 0;
    for (long i = 0; i < n; ++i) {
        if (!alive[i]) continue;
        for (int j = 0; j < d; ++j) res.terminal.at(row, j) = X.at(i, j);
        ++row;
    }
    return res;
}

LangevinResult langevin_simulate(const GibbsModel& model, const LangevinConfig& config, long chains,
                                 Rng& rng, std::vector<Tensor>* trajectory) {
    if (chains < 1) throw std::runtime_error("need at least one Langevin chain");
    const Tensor X0 = model.base().sample(chains, rng);
    return langevin_simulate(model, config, X0, rng, trajectory);
}

}  // namespace mixent
