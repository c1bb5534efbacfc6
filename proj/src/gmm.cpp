#include "mixent/gmm.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace mixent {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
constexpr long kEvalChunk = 65536;

double wall_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}
}  // namespace

GaussianMixture::GaussianMixture(int components, int dim, bool diagonal)
    : M_(components), d_(dim), diagonal_(diagonal) {
    if (components <= 0 || dim <= 0) throw std::runtime_error("mixture: components and dim must be positive");
    params_.add("weights", Tensor::zeros_vec(M_));
    params_.add("means", Tensor::zeros(M_, d_));
    params_.add("scales", Tensor::zeros(M_, packed_scale_len()));
    if (!diagonal_) {
        long k = 0;
        for (int i = 0; i < d_; ++i)
            for (int j = 0; j <= i; ++j, ++k)
                if (i == j) diag_packed_idx_.push_back(k);
    }
}

GaussianMixture GaussianMixture::init_from_data(const Tensor& X, int components, bool diagonal, Rng& rng) {
    if (X.rank() != 2 || X.rows() < components)
        throw std::runtime_error("mixture init: need at least one data point per component");
    const int d = static_cast<int>(X.cols());
    GaussianMixture gm(components, d, diagonal);

    // Per-dimension standard deviation of the data.
    std::vector<double> mean(d, 0.0), sd(d, 0.0);
    for (long i = 0; i < X.rows(); ++i)
        for (int j = 0; j < d; ++j) mean[j] += X.at(i, j);
    for (int j = 0; j < d; ++j) mean[j] /= static_cast<double>(X.rows());
    for (long i = 0; i < X.rows(); ++i)
        for (int j = 0; j < d; ++j) {
            const double c = X.at(i, j) - mean[j];
            sd[j] += c * c;
        }
    for (int j = 0; j < d; ++j) {
        sd[j] = std::sqrt(sd[j] / static_cast<double>(X.rows()));
        if (sd[j] <= 0.0) sd[j] = 1.0;
    }

    // Means: M distinct random rows.
    std::vector<long> idx(X.rows());
    for (long i = 0; i < X.rows(); ++i) idx[i] = i;
    rng.shuffle(idx);
    Tensor& means = gm.params_.value("means");
    for (int c = 0; c < components; ++c)
        for (int j = 0; j < d; ++j) means.at(c, j) = X.at(idx[c], j);

    // Precision diag(1/sd): packed diagonal stores log(1/sd) = -log sd.
    Tensor& scales = gm.params_.value("scales");
    for (int c = 0; c < components; ++c) {
        if (diagonal) {
            for (int j = 0; j < d; ++j) scales.at(c, j) = -std::log(sd[j]);
        } else {
            long k = 0;
            for (int i = 0; i < d; ++i)
                for (int j = 0; j <= i; ++j, ++k) scales.at(c, k) = (i == j) ? -std::log(sd[i]) : 0.0;
        }
    }
    return gm;
}

GaussianMixture::MixtureVars GaussianMixture::vars(Tape& t, bool trainable) const {
    MixtureVars mv;
    if (trainable) {
        mv.weights = t.leaf(params_.value("weights"));
        mv.means = t.leaf(params_.value("means"));
        mv.scales = t.leaf(params_.value("scales"));
    } else {
        mv.weights = t.constant(params_.value("weights"));
        mv.means = t.constant(params_.value("means"));
        mv.scales = t.constant(params_.value("scales"));
    }
    return mv;
}

Var GaussianMixture::component_scores(Tape& t, const MixtureVars& mv, Var x) const {
    if (t.val(x).rank() != 2 || t.val(x).cols() != d_)
        throw std::runtime_error("mixture scores: input shape " + t.val(x).shape_str());
    Var logw = t.sub_scalar_var(mv.weights, t.logsumexp_vec(mv.weights));
    std::vector<Var> cols;
    cols.reserve(M_);
    for (int j = 0; j < M_; ++j) {
        Var srow = t.row(mv.scales, j);
        Var centered = t.sub_rowvec(x, t.row(mv.means, j));
        Var y;
        Var logdet;
        if (diagonal_) {
            y = t.mul_rowvec(centered, t.exp_(srow));
            logdet = t.sum(srow);
        } else {
            Var L = t.tril_exp_diag(srow, d_);
            y = t.matmul(centered, L, false, true);
            logdet = t.sum(t.gather_rows(srow, diag_packed_idx_));
        }
        Var quad = t.scale(t.l2sq_rows(y), -0.5);
        Var cj = t.add_const(t.add(t.element(logw, j), logdet), -0.5 * d_ * kLog2Pi);
        cols.push_back(t.add_scalar_var(quad, cj));
    }
    return t.concat_cols(cols);
}

Var GaussianMixture::log_density_graph(Tape& t, const MixtureVars& mv, Var x) const {
    return t.logsumexp_rows(component_scores(t, mv, x));
}

Tensor GaussianMixture::log_density(const Tensor& X) const {
    if (X.rank() != 2 || X.cols() != d_) throw std::runtime_error("mixture log_density: bad input shape");
    Tensor out = Tensor::zeros_vec(X.rows());
    for (long start = 0; start < X.rows(); start += kEvalChunk) {
        const long stop = std::min(X.rows(), start + kEvalChunk);
        Tensor block = Tensor::zeros(stop - start, d_);
        for (long i = start; i < stop; ++i)
            for (int j = 0; j < d_; ++j) block.at(i - start, j) = X.at(i, j);
        Tape t;
        MixtureVars mv = vars(t, false);
        Var ld = log_density_graph(t, mv, t.constant(std::move(block)));
        const Tensor& v = t.val(ld);
        for (long i = start; i < stop; ++i) out.at(i) = v.at(i - start);
    }
    return out;
}

Tensor GaussianMixture::responsibilities(const Tensor& X, bool with_det_term) const {
    if (X.rank() != 2 || X.cols() != d_) throw std::runtime_error("mixture responsibilities: bad input shape");
    Tensor out = Tensor::zeros(X.rows(), M_);
    for (long start = 0; start < X.rows(); start += kEvalChunk) {
        const long stop = std::min(X.rows(), start + kEvalChunk);
        Tensor block = Tensor::zeros(stop - start, d_);
        for (long i = start; i < stop; ++i)
            for (int j = 0; j < d_; ++j) block.at(i - start, j) = X.at(i, j);
        Tape t;
        MixtureVars mv = vars(t, false);
        Var scores = component_scores(t, mv, t.constant(std::move(block)));
        Tensor s = t.val(scores);
        if (!with_det_term) {
            // Remove each component's normalizer term from its column.
            const Tensor& sc = params_.value("scales");
            for (int j = 0; j < M_; ++j) {
                double logdet = 0.0;
                if (diagonal_) {
                    for (int k = 0; k < d_; ++k) logdet += sc.at(j, k);
                } else {
                    for (long k : diag_packed_idx_) logdet += sc.at(j, k);
                }
                for (long i = 0; i < s.rows(); ++i) s.at(i, j) -= logdet;
            }
        }
        softmax_rows_inplace(s);
        for (long i = start; i < stop; ++i)
            for (int j = 0; j < M_; ++j) out.at(i, j) = s.at(i - start, j);
    }
    return out;
}

Tensor GaussianMixture::sample(long n, Rng& rng) const {
    // Component probabilities from the logits.
    const Tensor& logits = params_.value("weights");
    std::vector<double> cum(M_);
    {
        double m = logits.at(0);
        for (int j = 1; j < M_; ++j) m = std::max(m, logits.at(j));
        double s = 0.0;
        for (int j = 0; j < M_; ++j) {
            s += std::exp(logits.at(j) - m);
            cum[j] = s;
        }
        for (int j = 0; j < M_; ++j) cum[j] /= s;
        cum[M_ - 1] = 1.0;  // guard against rounding
    }
    const Tensor& means = params_.value("means");
    const Tensor& scales = params_.value("scales");

    Tensor out = Tensor::zeros(n, d_);
    std::vector<double> z(d_), v(d_);
    for (long i = 0; i < n; ++i) {
        const double u = rng.uniform();
        int c = 0;
        while (c < M_ - 1 && u >= cum[c]) ++c;
        for (int j = 0; j < d_; ++j) z[j] = rng.normal();
        if (diagonal_) {
            for (int j = 0; j < d_; ++j) v[j] = z[j] * std::exp(-scales.at(c, j));
        } else {
            // Solve L v = z by forward substitution; L has exp'd diagonal.
            long k = 0;
            std::vector<long> row_start(d_);
            for (int r = 0; r < d_; ++r) {
                row_start[r] = k;
                k += r + 1;
            }
            for (int r = 0; r < d_; ++r) {
                double s = z[r];
                for (int cidx = 0; cidx < r; ++cidx) s -= scales.at(c, row_start[r] + cidx) * v[cidx];
                v[r] = s / std::exp(scales.at(c, row_start[r] + r));
            }
        }
        for (int j = 0; j < d_; ++j) out.at(i, j) = means.at(c, j) + v[j];
    }
    return out;
}

double GaussianMixture::entropy_upper_estimate(const Tensor& X) const {
    Tensor ld = log_density(X);
    return -mean_all(ld);
}

std::vector<EpochRecord> GaussianMixture::train_cross_entropy(const Tensor& train, const Tensor& val,
                                                              const MixtureTrainOptions& opts, Rng& rng) {
    if (train.rank() != 2 || train.cols() != d_) throw std::runtime_error("mixture train: bad train shape");
    if (opts.record_val && (val.rank() != 2 || val.cols() != d_))
        throw std::runtime_error("mixture train: bad val shape");
    const long n = train.rows();
    const long bs = std::min(opts.batch_size, n);
    if (bs <= 0) throw std::runtime_error("mixture train: batch size must be positive");

    std::vector<long> order(n);
    for (long i = 0; i < n; ++i) order[i] = i;

    std::vector<EpochRecord> curve;
    const double t0 = wall_seconds();
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        for (long start = 0; start < n; start += bs) {
            const long stop = std::min(n, start + bs);
            Tensor batch = Tensor::zeros(stop - start, d_);
            for (long i = start; i < stop; ++i)
                for (int j = 0; j < d_; ++j) batch.at(i - start, j) = train.at(order[i], j);
            Tape t;
            MixtureVars mv = vars(t, true);
            Var loss = t.neg(t.mean(log_density_graph(t, mv, t.constant(std::move(batch)))));
            const double lv = t.val(loss).item();
            if (!std::isfinite(lv))
                throw std::runtime_error("mixture train: non-finite loss at epoch " + std::to_string(epoch));
            loss_sum += lv * static_cast<double>(stop - start);
            t.backward(loss);
            Tensor gw = t.grad_or_zero(mv.weights);
            Tensor gm = t.grad_or_zero(mv.means);
            Tensor gs = t.grad_or_zero(mv.scales);
            std::vector<const Tensor*> grads{&gw, &gm, &gs};
            adam_step(params_, grads, opts.adam);
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(n);
        rec.val_loss = opts.record_val ? entropy_upper_estimate(val) : std::nan("");
        rec.dv_estimate = std::nan("");
        rec.entropy_estimate = rec.val_loss;  // the cross-entropy is the bound
        rec.seconds = wall_seconds() - t0;
        curve.push_back(rec);
    }
    return curve;
}

}  // namespace mixent
