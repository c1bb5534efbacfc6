#include "mixent/estimators.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "mixent/knn.hpp"
#include "mixent/special.hpp"

namespace mixent {

namespace {

double wall_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

// Mean and standard error of a vector of per-sample terms.
void mean_and_se(const Tensor& terms, double& mean, double& se) {
    const long n = terms.rows();
    double s = 0.0;
    for (long i = 0; i < n; ++i) s += terms.at(i);
    mean = s / static_cast<double>(n);
    double ss = 0.0;
    for (long i = 0; i < n; ++i) {
        const double c = terms.at(i) - mean;
        ss += c * c;
    }
    se = std::sqrt(ss / static_cast<double>(n)) / std::sqrt(static_cast<double>(n));
}

constexpr double kHalfLog2Pi = 0.9189385332046727418;

}  // namespace

EntropyEstimate oracle_mc(const LogDensityFn& log_density, const Tensor& samples) {
    if (!log_density) throw std::runtime_error("oracle_mc: missing log-density callback");
    if (samples.rank() != 2 || samples.rows() == 0)
        throw std::runtime_error("oracle_mc: need a nonempty sample matrix");
    const double t0 = wall_seconds();
    Tensor lp = log_density(samples);
    if (lp.rows() != samples.rows())
        throw std::runtime_error("oracle_mc: callback returned " + lp.shape_str() + " for " +
                                 std::to_string(samples.rows()) + " rows");
    Tensor terms = Tensor::zeros_vec(lp.rows());
    for (long i = 0; i < lp.rows(); ++i) {
        if (!std::isfinite(lp.at(i)))
            throw std::runtime_error("oracle_mc: non-finite log-density at row " + std::to_string(i) +
                                     " (sample outside the support?)");
        terms.at(i) = -lp.at(i);
    }
    EntropyEstimate est;
    est.method = "mc";
    est.n = samples.rows();
    mean_and_se(terms, est.value, est.standard_error);
    est.seconds = wall_seconds() - t0;
    return est;
}

EntropyEstimate oracle_kde(const Tensor& train, const Tensor& eval, double h) {
    if (h <= 0.0) throw std::runtime_error("oracle_kde: bandwidth must be positive, got " + std::to_string(h));
    if (train.rank() != 2 || eval.rank() != 2 || train.rows() == 0 || eval.rows() == 0)
        throw std::runtime_error("oracle_kde: need nonempty train and eval matrices");
    if (train.cols() != eval.cols())
        throw std::runtime_error("oracle_kde: dimension mismatch " + train.shape_str() + " vs " +
                                 eval.shape_str());
    const double t0 = wall_seconds();
    const long n = train.rows();
    const int d = static_cast<int>(train.cols());
    KdTree tree(train);

    // Kernels beyond radius^2 = r_min^2 + 2h^2 (40 + ln n) contribute less
    // than e^-40 of the nearest kernel even if all n points sat there, which
    // vanishes inside the log at double precision. The truncated sum is the
    // full Parzen sum, just skipping terms that cannot change the result.
    const double slack = 2.0 * h * h * (40.0 + std::log(static_cast<double>(n)));
    const double inv2h2 = 1.0 / (2.0 * h * h);
    const double log_norm =
        -std::log(static_cast<double>(n)) - static_cast<double>(d) * (std::log(h) + kHalfLog2Pi);

    Tensor terms = Tensor::zeros_vec(eval.rows());
    std::vector<double> q(d), d2s;
    std::vector<std::pair<double, long>> nn;
    for (long i = 0; i < eval.rows(); ++i) {
        for (int j = 0; j < d; ++j) q[j] = eval.at(i, j);
        tree.nearest(q.data(), 1, -1, nn);
        const double rmin2 = nn[0].first;
        tree.within_dist2(q.data(), rmin2 + slack, d2s);
        double acc = 0.0;
        for (double d2 : d2s) acc += std::exp((rmin2 - d2) * inv2h2);
        const double log_p = log_norm - rmin2 * inv2h2 + std::log(acc);
        terms.at(i) = -log_p;
    }
    EntropyEstimate est;
    est.method = "kde";
    est.n = eval.rows();
    est.m = n;
    mean_and_se(terms, est.value, est.standard_error);
    est.seconds = wall_seconds() - t0;
    return est;
}

EntropyEstimate estimate_knn_kl(const Tensor& samples, int k) {
    if (samples.rank() != 2) throw std::runtime_error("knn entropy: need a sample matrix");
    const long n = samples.rows();
    const int d = static_cast<int>(samples.cols());
    if (k < 1 || n <= k)
        throw std::runtime_error("knn entropy: need n > k >= 1, got n = " + std::to_string(n) +
                                 ", k = " + std::to_string(k));
    const double t0 = wall_seconds();
    KdTree tree(samples);
    const double constant =
        digamma(static_cast<double>(n)) - digamma(static_cast<double>(k)) + unit_ball_log_volume(d);

    Tensor terms = Tensor::zeros_vec(n);
    std::vector<double> q(d);
    std::vector<std::pair<double, long>> nn;
    for (long i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) q[j] = samples.at(i, j);
        tree.nearest(q.data(), k, i, nn);
        const double eps2 = nn[static_cast<size_t>(k) - 1].first;
        if (eps2 <= 0.0)
            throw std::runtime_error("knn entropy: duplicate points, rows " + std::to_string(i) +
                                     " and " + std::to_string(nn[static_cast<size_t>(k) - 1].second));
        terms.at(i) = 0.5 * static_cast<double>(d) * std::log(eps2);  // d * log eps
    }
    EntropyEstimate est;
    est.method = "knn";
    est.n = n;
    double mean_term, se;
    mean_and_se(terms, mean_term, se);
    est.value = constant + mean_term;
    est.standard_error = se;
    est.seconds = wall_seconds() - t0;
    return est;
}

EntropyEstimate estimate_remedi(const LogDensityFn& log_q, const LogDensityFn& t_fn,
                                const Tensor& eval_p, const Tensor& eval_q) {
    if (!log_q) throw std::runtime_error("estimate: missing base log-density");
    if (eval_p.rank() != 2 || eval_p.rows() == 0)
        throw std::runtime_error("estimate: need nonempty evaluation data");
    const double t0 = wall_seconds();
    const long n = eval_p.rows();
    Tensor lq = log_q(eval_p);
    Tensor tp = t_fn ? t_fn(eval_p) : Tensor::zeros_vec(n);

    double log_mean_exp_q = 0.0;
    long m = 0;
    if (t_fn) {
        if (eval_q.rank() != 2 || eval_q.rows() == 0)
            throw std::runtime_error("estimate: need reference samples for the correction term");
        Tensor tq = t_fn(eval_q);
        m = tq.rows();
        log_mean_exp_q = logsumexp(tq.data(), m) - std::log(static_cast<double>(m));
    }

    // Per-sample P-side terms -log q - T; the constant log mean_Q e^T shifts
    // the value but not the spread.
    Tensor terms = Tensor::zeros_vec(n);
    for (long i = 0; i < n; ++i) {
        if (!std::isfinite(lq.at(i)))
            throw std::runtime_error("estimate: non-finite base log-density at row " + std::to_string(i));
        terms.at(i) = -lq.at(i) - tp.at(i);
    }
    EntropyEstimate est;
    est.method = "remedi";
    est.n = n;
    est.m = m;
    mean_and_se(terms, est.value, est.standard_error);
    est.value += log_mean_exp_q;
    est.seconds = wall_seconds() - t0;
    return est;
}

EntropyEstimate estimate_remedi(const GaussianMixture& base, const CorrectionNetwork* net,
                                const Tensor& eval_p, const Tensor& eval_q) {
    LogDensityFn lq = [&base](const Tensor& x) { return base.log_density(x); };
    LogDensityFn tf;
    if (net != nullptr) tf = [&base, net](const Tensor& x) { return net->t_values(x, &base); };
    return estimate_remedi(lq, tf, eval_p, eval_q);
}

}  // namespace mixent
