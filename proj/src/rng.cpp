#include "mixent/rng.hpp"

#include <cmath>

namespace mixent {

namespace {

// SplitMix64 finalizer; standard constants.
uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

Rng Rng::substream(uint64_t stream_id) const {
    return Rng(splitmix64(splitmix64(seed_) ^ splitmix64(stream_id)));
}

double Rng::normal() {
    if (have_cached_) {
        have_cached_ = false;
        return cached_;
    }
    // Box-Muller; reject u1 == 0 so the log is finite.
    double u1;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    cached_ = r * std::sin(theta);
    have_cached_ = true;
    return r * std::cos(theta);
}

uint64_t Rng::index(uint64_t n) {
    return static_cast<uint64_t>((static_cast<unsigned __int128>(engine_()) * n) >> 64);
}

void Rng::fill_normal(Tensor& t) {
    double* p = t.data();
    for (long i = 0; i < t.size(); ++i) p[i] = normal();
}

void Rng::fill_uniform(Tensor& t) {
    double* p = t.data();
    for (long i = 0; i < t.size(); ++i) p[i] = uniform();
}

void Rng::shuffle(std::vector<long>& idx) {
    for (long i = static_cast<long>(idx.size()) - 1; i > 0; --i) {
        const long j = static_cast<long>(index(static_cast<uint64_t>(i + 1)));
        std::swap(idx[i], idx[j]);
    }
}

}  // namespace mixent
