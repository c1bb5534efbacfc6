#pragma once

#include <string>
#include <vector>

#include "mixent/tensor.hpp"

namespace mixent {

// Named, insertion-ordered parameter slots plus Adam moment buffers.
// Iteration order is the insertion order, so updates are deterministic.
class ParameterStore {
public:
    int add(const std::string& name, Tensor init);
    long count() const { return static_cast<long>(names_.size()); }
    const std::string& name(long i) const { return names_[i]; }
    Tensor& value(long i) { return values_[i]; }
    const Tensor& value(long i) const { return values_[i]; }
    Tensor& value(const std::string& name);
    const Tensor& value(const std::string& name) const;
    bool has(const std::string& name) const;
    long index(const std::string& name) const;  // -1 if absent

    long total_scalars() const;

    // Adam state, lazily sized to match the values.
    Tensor& moment1(long i);
    Tensor& moment2(long i);
    long step_count = 0;

private:
    std::vector<std::string> names_;
    std::vector<Tensor> values_, m1_, m2_;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // decoupled (AdamW); applied to every slot
};

// One optimizer step. grads[i] aligns with store slot i; a null pointer means
// zero gradient for that slot (moments still update, decay still applies).
// Throws if any gradient is non-finite, naming the offending slot.
void adam_step(ParameterStore& store, const std::vector<const Tensor*>& grads, const AdamConfig& cfg);

}  // namespace mixent

#include "mixent/tape.hpp"

namespace mixent {

// Bind every slot of a store to tape nodes (leaves when trainable).
std::vector<Var> bind_params(Tape& t, const ParameterStore& store, bool trainable);

// Gradients aligned with the store slots after backward(); zero where a slot
// did not participate in the graph.
std::vector<Tensor> collect_grads(const Tape& t, const std::vector<Var>& bound);

}  // namespace mixent
