#include "mixent/correction.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace mixent {

namespace {
double wall_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}
}  // namespace

CorrectionNetwork::CorrectionNetwork(int dim, int components, CorrectionConfig cfg, Rng& rng)
    : cfg_(std::move(cfg)), d_(dim), M_(components) {
    if (d_ <= 0) throw std::runtime_error("correction: dim must be positive");
    if (cfg_.widths.empty()) throw std::runtime_error("correction: trunk needs at least one layer");
    if (cfg_.variant == CorrectionConfig::Variant::mixture && M_ <= 0)
        throw std::runtime_error("correction: mixture variant needs base components");

    // Shared trunk, He-initialized.
    int in_dim = d_;
    for (size_t l = 0; l < cfg_.widths.size(); ++l) {
        const int w = cfg_.widths[l];
        if (w <= 0) throw std::runtime_error("correction: trunk widths must be positive");
        Tensor W = Tensor::zeros(w, in_dim);
        const double sd = std::sqrt(2.0 / static_cast<double>(in_dim));
        for (long i = 0; i < W.size(); ++i) W.at(i) = sd * rng.normal();
        trunk_w_.push_back(params_.add("trunk_w" + std::to_string(l), std::move(W)));
        trunk_b_.push_back(params_.add("trunk_b" + std::to_string(l), Tensor::zeros_vec(w)));
        in_dim = w;
    }
    const int dp = cfg_.widths.back();

    if (cfg_.variant == CorrectionConfig::Variant::mixture) {
        for (int i = 0; i < M_; ++i) {
            Tensor A = Tensor::zeros(d_, d_);
            for (int j = 0; j < d_; ++j) A.at(j, j) = 1.0;  // identity: start from base features
            proj_.push_back(params_.add("proj_a" + std::to_string(i), std::move(A)));
        }
        for (int i = 0; i < M_; ++i)
            head_.push_back(params_.add("head_b" + std::to_string(i), Tensor::zeros_vec(dp)));
    } else {
        head_w_ = params_.add("head_w", Tensor::zeros_vec(dp));
    }
    // Zero-initialized output path: training starts from T == log(1 + eps).
    head_bias_ = params_.add("head_bias", Tensor::scalar(0.0));
    t_bias_ = params_.add("t_bias", Tensor::scalar(0.0));
}

Var CorrectionNetwork::build_t(Tape& t, const std::vector<Var>& bound, Var x,
                               const GaussianMixture* base) const {
    if (static_cast<long>(bound.size()) != params_.count())
        throw std::runtime_error("correction: bound parameter list does not match slots");
    if (t.val(x).rank() != 2 || t.val(x).cols() != d_)
        throw std::runtime_error("correction: input shape " + t.val(x).shape_str());
    const long n = t.val(x).rows();

    Var z;  // pre-activation [n]
    if (cfg_.variant == CorrectionConfig::Variant::plain) {
        Var h = x;
        for (size_t l = 0; l < trunk_w_.size(); ++l)
            h = t.relu(t.affine(h, bound[trunk_w_[l]], bound[trunk_b_[l]]));
        z = t.matvec(h, bound[head_w_]);
    } else {
        if (base == nullptr) throw std::runtime_error("correction: mixture variant needs the base density");
        if (base->components() != M_ || base->dim() != d_)
            throw std::runtime_error("correction: base shape does not match the network");

        // Base features y_i = L_i (x - mu_i) and relevance scores, built from
        // the frozen base as constants (x-gradients still flow; see the base
        // class for the score formula these mirror).
        Var bw = t.constant(base->params().value("weights"));
        Var bm = t.constant(base->params().value("means"));
        Var bs = t.constant(base->params().value("scales"));
        Var logw = t.sub_scalar_var(bw, t.logsumexp_vec(bw));
        std::vector<long> diag_idx;
        if (!base->diagonal()) {
            long k = 0;
            for (int i = 0; i < d_; ++i)
                for (int j = 0; j <= i; ++j, ++k)
                    if (i == j) diag_idx.push_back(k);
        }
        std::vector<Var> ys(M_);
        std::vector<Var> score_cols(M_);
        for (int j = 0; j < M_; ++j) {
            Var srow = t.row(bs, j);
            Var centered = t.sub_rowvec(x, t.row(bm, j));
            Var logdet;
            if (base->diagonal()) {
                ys[j] = t.mul_rowvec(centered, t.exp_(srow));
                logdet = t.sum(srow);
            } else {
                ys[j] = t.matmul(centered, t.tril_exp_diag(srow, d_), false, true);
                logdet = t.sum(t.gather_rows(srow, diag_idx));
            }
            Var quad = t.scale(t.l2sq_rows(ys[j]), -0.5);
            Var cj = t.element(logw, j);
            if (cfg_.relevance_det_term) cj = t.add(cj, logdet);
            score_cols[j] = t.add_scalar_var(quad, cj);
        }
        Var relevance = t.softmax_rows(t.concat_cols(score_cols));

        // Route each row through the components that carry posterior mass.
        const Tensor rel = t.val(relevance);  // copy: node storage may move
        std::vector<std::vector<long>> comp_rows(M_);
        if (cfg_.relevance_cutoff > 0.0) {
            for (long i = 0; i < n; ++i)
                for (int j = 0; j < M_; ++j)
                    if (rel.at(i, j) >= cfg_.relevance_cutoff) comp_rows[j].push_back(i);
        } else {
            for (int j = 0; j < M_; ++j) {
                comp_rows[j].resize(n);
                for (long i = 0; i < n; ++i) comp_rows[j][i] = i;
            }
        }

        // One trunk pass over the stacked per-component projections.
        std::vector<Var> stacked;
        std::vector<int> active;
        for (int j = 0; j < M_; ++j) {
            if (comp_rows[j].empty()) continue;
            Var rows = (static_cast<long>(comp_rows[j].size()) == n) ? ys[j] : t.gather_rows(ys[j], comp_rows[j]);
            stacked.push_back(t.matmul(rows, bound[proj_[j]], false, true));
            active.push_back(j);
        }
        if (stacked.empty()) throw std::runtime_error("correction: no component passed the relevance cutoff");
        Var h = stacked.size() == 1 ? stacked[0] : t.concat_rows(stacked);
        for (size_t l = 0; l < trunk_w_.size(); ++l)
            h = t.relu(t.affine(h, bound[trunk_w_[l]], bound[trunk_b_[l]]));

        // Slice back per component, weight by relevance, scatter into z.
        z = t.constant(Tensor::zeros_vec(n));
        long off = 0;
        for (int j : active) {
            const long k = static_cast<long>(comp_rows[j].size());
            Var s = t.matvec(t.slice_rows(h, off, off + k), bound[head_[j]]);
            Var r = t.gather_rows(t.col(relevance, j), comp_rows[j]);
            Var contrib = t.mul(r, s);
            z = t.add(z, (k == n) ? contrib : t.scatter_vec(contrib, comp_rows[j], n));
            off += k;
        }
    }

    z = t.add_scalar_var(z, bound[head_bias_]);
    Var f = t.add_const(t.elu(z), 1.0 + cfg_.epsilon);
    return t.add_scalar_var(t.log_(f), bound[t_bias_]);
}

Tensor CorrectionNetwork::t_values(const Tensor& X, const GaussianMixture* base) const {
    if (X.rank() != 2 || X.cols() != d_) throw std::runtime_error("correction t_values: bad input shape");
    // Chunked so the stacked trunk activations stay within a few hundred MB
    // even for unpruned many-component bases.
    const long chunk = 2048;
    Tensor out = Tensor::zeros_vec(X.rows());
    for (long start = 0; start < X.rows(); start += chunk) {
        const long stop = std::min(X.rows(), start + chunk);
        Tensor block = Tensor::zeros(stop - start, d_);
        for (long i = start; i < stop; ++i)
            for (int j = 0; j < d_; ++j) block.at(i - start, j) = X.at(i, j);
        Tape t;
        auto bound = bind_params(t, params_, false);
        Var T = build_t(t, bound, t.constant(std::move(block)), base);
        const Tensor& v = t.val(T);
        for (long i = start; i < stop; ++i) out.at(i) = v.at(i - start);
    }
    return out;
}

DvEstimate dv_estimate(const CorrectionNetwork& net, const GaussianMixture& base, const Tensor& P,
                       const Tensor& Q) {
    if (P.rows() == 0 || Q.rows() == 0) throw std::runtime_error("dv_estimate: empty sample set");
    Tensor tp = net.t_values(P, &base);
    Tensor tq = net.t_values(Q, &base);
    DvEstimate est;
    est.mean_t_p = mean_all(tp);
    est.log_mean_exp_t_q = logsumexp(tq.data(), tq.rows()) - std::log(static_cast<double>(tq.rows()));
    est.dv = est.mean_t_p - est.log_mean_exp_t_q;
    double ss = 0.0;
    for (long i = 0; i < tp.rows(); ++i) {
        const double c = tp.at(i) - est.mean_t_p;
        ss += c * c;
    }
    est.se = std::sqrt(ss / static_cast<double>(tp.rows())) / std::sqrt(static_cast<double>(tp.rows()));
    return est;
}

double dv_gradient_step(CorrectionNetwork& net, const GaussianMixture& base, const Tensor& xp,
                        const Tensor& xq, DvState& state, const AdamConfig& adam) {
    const long n = xp.rows(), m = xq.rows();
    if (n == 0 || m == 0) throw std::runtime_error("dv step: empty batch");
    // One stacked build so the trunk runs a single pass over both batches.
    Tensor cat = Tensor::zeros(n + m, xp.cols());
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < xp.cols(); ++j) cat.at(i, j) = xp.at(i, j);
    for (long i = 0; i < m; ++i)
        for (long j = 0; j < xq.cols(); ++j) cat.at(n + i, j) = xq.at(i, j);

    Tape t;
    auto bound = bind_params(t, net.params(), true);
    Var T = net.build_t(t, bound, t.constant(std::move(cat)), &base);
    std::vector<long> pidx(n), qidx(m);
    for (long i = 0; i < n; ++i) pidx[i] = i;
    for (long i = 0; i < m; ++i) qidx[i] = n + i;
    Var Tp = t.gather_rows(T, pidx);
    Var Tq = t.gather_rows(T, qidx);

    Var A = t.mean(Tp);
    Var B = t.mean(t.exp_(Tq));
    const double b_val = t.val(B).item();
    if (!std::isfinite(b_val) || b_val < 1e-300)
        throw std::runtime_error("dv step: normalizer mean_Q[e^T] is degenerate (" + std::to_string(b_val) + ")");

    // EMA update precedes the gradient, so decay = 0 reproduces the naive
    // gradient of -(mean_P T - log mean_Q e^T) exactly.
    state.ema = state.initialized ? state.decay * state.ema + (1.0 - state.decay) * b_val : b_val;
    state.initialized = true;

    Var surrogate = t.sub(t.scale(B, 1.0 / state.ema), A);
    t.backward(surrogate);
    auto grads = collect_grads(t, bound);
    std::vector<const Tensor*> gp(grads.size());
    for (size_t i = 0; i < grads.size(); ++i) gp[i] = &grads[i];
    adam_step(net.params(), gp, adam);

    // Report the stabilized batch objective.
    const Tensor& tqv = t.val(Tq);
    const double log_mean = logsumexp(tqv.data(), m) - std::log(static_cast<double>(m));
    return t.val(A).item() - log_mean;
}

std::vector<EpochRecord> train_dv(CorrectionNetwork& net, const GaussianMixture& base,
                                  const Tensor& train_p, const Tensor& q_samples, const Tensor& val_p,
                                  const Tensor& eval_q, const DvTrainOptions& opts, Rng& rng) {
    const long n = train_p.rows(), m = q_samples.rows();
    if (n == 0 || m == 0) throw std::runtime_error("dv train: empty training or reference set");
    const long bs = std::min(opts.batch_size, n);
    const long bq = std::min(opts.batch_size, m);
    if (bs <= 0) throw std::runtime_error("dv train: batch size must be positive");

    std::vector<long> porder(n), qorder(m);
    for (long i = 0; i < n; ++i) porder[i] = i;
    for (long i = 0; i < m; ++i) qorder[i] = i;
    long qpos = m;  // trigger an initial shuffle

    DvState state;
    state.decay = opts.ema_decay;

    auto gather = [](const Tensor& src, const std::vector<long>& ord, long a, long b) {
        Tensor out = Tensor::zeros(b - a, src.cols());
        for (long i = a; i < b; ++i)
            for (long j = 0; j < src.cols(); ++j) out.at(i - a, j) = src.at(ord[i], j);
        return out;
    };

    std::vector<EpochRecord> curve;
    const Tensor* qsrc = &q_samples;
    Tensor q_fresh;
    const double t0 = wall_seconds();
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        if (opts.resample_q && epoch > 0) {
            q_fresh = base.sample(m, rng);
            qsrc = &q_fresh;
            qpos = m;
        }
        rng.shuffle(porder);
        double loss_sum = 0.0;
        for (long start = 0; start < n; start += bs) {
            const long stop = std::min(n, start + bs);
            if (qpos + bq > m) {
                rng.shuffle(qorder);
                qpos = 0;
            }
            Tensor bp = gather(train_p, porder, start, stop);
            Tensor bqt = gather(*qsrc, qorder, qpos, qpos + bq);
            qpos += bq;
            const double batch_dv = dv_gradient_step(net, base, bp, bqt, state, opts.adam);
            if (!std::isfinite(batch_dv))
                throw std::runtime_error("dv train: non-finite objective at epoch " + std::to_string(epoch));
            loss_sum += -batch_dv * static_cast<double>(stop - start);
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(n);
        rec.val_loss = std::nan("");
        rec.dv_estimate = std::nan("");
        rec.entropy_estimate = std::nan("");
        if (opts.curve_eval != 0 && val_p.rows() > 0 && eval_q.rows() > 0) {
            const long kp = opts.curve_eval < 0 ? val_p.rows() : std::min(opts.curve_eval, val_p.rows());
            const long kq = opts.curve_eval < 0 ? eval_q.rows() : std::min(opts.curve_eval, eval_q.rows());
            Tensor vp = Tensor::zeros(kp, val_p.cols());
            for (long i = 0; i < kp; ++i)
                for (long j = 0; j < val_p.cols(); ++j) vp.at(i, j) = val_p.at(i, j);
            Tensor vq = Tensor::zeros(kq, eval_q.cols());
            for (long i = 0; i < kq; ++i)
                for (long j = 0; j < eval_q.cols(); ++j) vq.at(i, j) = eval_q.at(i, j);
            DvEstimate est = dv_estimate(net, base, vp, vq);
            rec.val_loss = -est.dv;
            rec.dv_estimate = est.dv;
            rec.entropy_estimate = opts.base_val_ce - est.dv;
        }
        rec.seconds = wall_seconds() - t0;
        curve.push_back(rec);
    }
    return curve;
}

}  // namespace mixent
