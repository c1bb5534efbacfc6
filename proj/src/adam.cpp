#include "mixent/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace mixent {

int ParameterStore::add(const std::string& name, Tensor init) {
    if (has(name)) throw std::runtime_error("parameter slot already exists: " + name);
    names_.push_back(name);
    values_.push_back(std::move(init));
    m1_.emplace_back();
    m2_.emplace_back();
    return static_cast<int>(names_.size()) - 1;
}

long ParameterStore::index(const std::string& name) const {
    for (size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return static_cast<long>(i);
    return -1;
}

bool ParameterStore::has(const std::string& name) const { return index(name) >= 0; }

Tensor& ParameterStore::value(const std::string& name) {
    const long i = index(name);
    if (i < 0) throw std::runtime_error("no parameter slot named " + name);
    return values_[i];
}

const Tensor& ParameterStore::value(const std::string& name) const {
    const long i = index(name);
    if (i < 0) throw std::runtime_error("no parameter slot named " + name);
    return values_[i];
}

long ParameterStore::total_scalars() const {
    long n = 0;
    for (const Tensor& t : values_) n += t.size();
    return n;
}

static Tensor& sized_like(Tensor& buf, const Tensor& ref) {
    if (!buf.same_shape(ref)) {
        if (ref.rank() == 0)
            buf = Tensor::scalar(0.0);
        else if (ref.rank() == 1)
            buf = Tensor::zeros_vec(ref.rows());
        else
            buf = Tensor::zeros(ref.rows(), ref.cols());
    }
    return buf;
}

Tensor& ParameterStore::moment1(long i) { return sized_like(m1_[i], values_[i]); }
Tensor& ParameterStore::moment2(long i) { return sized_like(m2_[i], values_[i]); }

void adam_step(ParameterStore& store, const std::vector<const Tensor*>& grads, const AdamConfig& cfg) {
    if (static_cast<long>(grads.size()) != store.count())
        throw std::runtime_error("adam_step: gradient list does not match parameter slots");
    for (long i = 0; i < store.count(); ++i) {
        if (grads[i] == nullptr) continue;
        if (!grads[i]->all_finite())
            throw std::runtime_error("adam_step: non-finite gradient in slot " + store.name(i));
        if (!grads[i]->same_shape(store.value(i)))
            throw std::runtime_error("adam_step: gradient shape mismatch in slot " + store.name(i));
    }
    store.step_count += 1;
    const double t = static_cast<double>(store.step_count);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (long i = 0; i < store.count(); ++i) {
        Tensor& p = store.value(i);
        Tensor& m = store.moment1(i);
        Tensor& v = store.moment2(i);
        double* pp = p.data();
        double* pm = m.data();
        double* pv = v.data();
        const double* pg = grads[i] ? grads[i]->data() : nullptr;
        for (long k = 0; k < p.size(); ++k) {
            const double g = pg ? pg[k] : 0.0;
            pm[k] = cfg.beta1 * pm[k] + (1.0 - cfg.beta1) * g;
            pv[k] = cfg.beta2 * pv[k] + (1.0 - cfg.beta2) * g * g;
            const double mhat = pm[k] / bc1;
            const double vhat = pv[k] / bc2;
            // Decoupled weight decay: shrink first, then the Adam update.
            pp[k] -= cfg.lr * cfg.weight_decay * pp[k];
            pp[k] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

std::vector<Var> bind_params(Tape& t, const ParameterStore& store, bool trainable) {
    std::vector<Var> out;
    out.reserve(store.count());
    for (long i = 0; i < store.count(); ++i)
        out.push_back(trainable ? t.leaf(store.value(i)) : t.constant(store.value(i)));
    return out;
}

std::vector<Tensor> collect_grads(const Tape& t, const std::vector<Var>& bound) {
    std::vector<Tensor> out;
    out.reserve(bound.size());
    for (Var v : bound) out.push_back(t.grad_or_zero(v));
    return out;
}

}  // namespace mixent
