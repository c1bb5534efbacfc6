#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "mixent/tensor.hpp"

namespace mixent {

// Deterministic random source.
//
// std::mt19937_64 has a bit-exact sequence mandated by the standard, but the
// standard *distributions* (normal_distribution, uniform_real_distribution)
// do not, and differ across standard libraries. So all variate generation is
// done here by hand: uniforms via the usual 53-bit mantissa trick and
// normals via Box-Muller. Identical seeds give identical streams on any
// conforming platform.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed), seed_(seed) {}

    // Derive an independent substream; SplitMix64 scrambles (seed, stream id)
    // so nearby ids do not produce correlated engines.
    Rng substream(uint64_t stream_id) const;

    uint64_t seed() const { return seed_; }

    uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform_range(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; second variate is cached.
    double normal();

    // Uniform integer in [0, n). Multiply-shift bounding; bias is O(n / 2^64).
    uint64_t index(uint64_t n);

    void fill_normal(Tensor& t);
    void fill_uniform(Tensor& t);

    // Fisher-Yates.
    void shuffle(std::vector<long>& idx);

private:
    std::mt19937_64 engine_;
    uint64_t seed_ = 0;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

}  // namespace mixent
