#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "mixent/gibbs.hpp"
#include "mixent/rng.hpp"

using namespace mixent;

namespace {

Tensor random_matrix(long n, int d, Rng& rng, double spread = 1.0) {
    Tensor x = Tensor::zeros(n, d);
    rng.fill_normal(x);
    for (long i = 0; i < x.size(); ++i) x.at(i) *= spread;
    return x;
}

void randomize(CorrectionNetwork& net, Rng& rng, double scale) {
    for (long i = 0; i < net.params().count(); ++i) {
        Tensor& v = net.params().value(i);
        for (long k = 0; k < v.size(); ++k) v.at(k) += scale * rng.normal();
    }
}

}  // namespace

TEST_CASE("without a correction the tilted density is the base itself") {
    GaussianMixture base(2, 3, false);
    Rng rng(7);
    base.params().value("means") = random_matrix(2, 3, rng, 1.5);
    GibbsModel g(base, nullptr);
    Tensor x = random_matrix(50, 3, rng);
    Tensor lg = g.log_unnormalized(x);
    Tensor lq = base.log_density(x);
    for (long i = 0; i < x.rows(); ++i) CHECK(lg.at(i) == lq.at(i));
    Tensor ec = g.exp_correction(x);
    for (long i = 0; i < x.rows(); ++i) CHECK(ec.at(i) == 1.0);
}

TEST_CASE("standard normal gradient is minus x") {
    GaussianMixture base(1, 2, false);
    GibbsModel g(base, nullptr);
    Rng rng(9);
    Tensor x = random_matrix(30, 2, rng, 2.0);
    GibbsEval ev = g.value_and_grad(x);
    constexpr double kLog2Pi = 1.8378770664093454836;
    for (long i = 0; i < x.rows(); ++i) {
        const double r2 = x.at(i, 0) * x.at(i, 0) + x.at(i, 1) * x.at(i, 1);
        CHECK(ev.log_density.at(i) == doctest::Approx(-kLog2Pi - 0.5 * r2).epsilon(1e-13));
        CHECK(ev.grad.at(i, 0) == doctest::Approx(-x.at(i, 0)).epsilon(1e-13));
        CHECK(ev.grad.at(i, 1) == doctest::Approx(-x.at(i, 1)).epsilon(1e-13));
    }
}

TEST_CASE("mixture gradient matches the responsibility-weighted closed form") {
    // d log q / dx = -sum_i r_i(x) Lambda_i (x - mu_i) with Lambda = L^T L;
    // 1-d diagonal case: -sum_i r_i s_i^2 (x - mu_i), s_i = exp(scale_i).
    GaussianMixture base(2, 1, true);
    Tensor means = Tensor::zeros(2, 1);
    means.at(0, 0) = -1.2;
    means.at(1, 0) = 0.9;
    base.params().value("means") = means;
    Tensor scales = Tensor::zeros(2, 1);
    scales.at(0, 0) = 0.4;
    scales.at(1, 0) = -0.3;
    base.params().value("scales") = scales;
    Tensor w = Tensor::zeros_vec(2);
    w.at(0) = 0.5;
    base.params().value("weights") = w;

    Rng rng(11);
    Tensor x = random_matrix(40, 1, rng, 2.0);
    GibbsModel g(base, nullptr);
    GibbsEval ev = g.value_and_grad(x);
    Tensor resp = base.responsibilities(x, true);
    for (long i = 0; i < x.rows(); ++i) {
        double expected = 0.0;
        for (int c = 0; c < 2; ++c) {
            const double s = std::exp(scales.at(c, 0));
            expected -= resp.at(i, c) * s * s * (x.at(i, 0) - means.at(c, 0));
        }
        CHECK(ev.grad.at(i, 0) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("corrected values add the correction exactly") {
    GaussianMixture base(2, 2, false);
    Rng rng(13);
    base.params().value("means") = random_matrix(2, 2, rng, 1.5);
    CorrectionConfig cfg;
    cfg.widths = {24, 16};
    CorrectionNetwork net(2, 2, cfg, rng);
    randomize(net, rng, 0.4);
    GibbsModel g(base, &net);

    Tensor x = random_matrix(60, 2, rng, 1.5);
    Tensor lg = g.log_unnormalized(x);
    Tensor lq = base.log_density(x);
    Tensor tv = net.t_values(x, &base);
    for (long i = 0; i < x.rows(); ++i)
        CHECK(lg.at(i) == doctest::Approx(lq.at(i) + tv.at(i)).epsilon(1e-14));
    Tensor ec = g.exp_correction(x);
    for (long i = 0; i < x.rows(); ++i)
        CHECK(ec.at(i) == doctest::Approx(std::exp(tv.at(i))).epsilon(1e-15));
}

TEST_CASE("corrected gradient matches central differences") {
    GaussianMixture base(3, 2, false);
    Rng rng(17);
    base.params().value("means") = random_matrix(3, 2, rng, 1.2);
    Tensor scales = Tensor::zeros(3, 3);
    rng.fill_normal(scales);
    for (long i = 0; i < scales.size(); ++i) scales.at(i) *= 0.25;
    base.params().value("scales") = scales;
    CorrectionConfig cfg;
    cfg.widths = {20, 14};
    cfg.relevance_cutoff = 0.0;
    CorrectionNetwork net(2, 3, cfg, rng);
    randomize(net, rng, 0.4);
    GibbsModel g(base, &net);

    Tensor x = random_matrix(25, 2, rng, 1.5);
    GibbsEval ev = g.value_and_grad(x);
    const double h = 1e-6;
    for (long i = 0; i < x.rows(); ++i) {
        for (int j = 0; j < 2; ++j) {
            Tensor xp = x, xm = x;
            xp.at(i, j) += h;
            xm.at(i, j) -= h;
            const double fd =
                (g.log_unnormalized(xp).at(i) - g.log_unnormalized(xm).at(i)) / (2.0 * h);
            CHECK(ev.grad.at(i, j) == doctest::Approx(fd).epsilon(5e-4));
        }
    }
}

TEST_CASE("batched gradients equal row-at-a-time gradients") {
    GaussianMixture base(2, 2, true);
    Rng rng(19);
    base.params().value("means") = random_matrix(2, 2, rng, 1.0);
    CorrectionConfig cfg;
    cfg.widths = {16, 8};
    CorrectionNetwork net(2, 2, cfg, rng);
    randomize(net, rng, 0.5);
    GibbsModel g(base, &net);

    Tensor x = random_matrix(23, 2, rng, 1.5);
    GibbsEval all = g.value_and_grad(x);
    for (long i = 0; i < x.rows(); ++i) {
        Tensor row = Tensor::zeros(1, 2);
        row.at(0, 0) = x.at(i, 0);
        row.at(0, 1) = x.at(i, 1);
        GibbsEval one = g.value_and_grad(row);
        CHECK(one.log_density.at(0) == doctest::Approx(all.log_density.at(i)).epsilon(1e-12));
        CHECK(one.grad.at(0, 0) == doctest::Approx(all.grad.at(i, 0)).epsilon(1e-11));
        CHECK(one.grad.at(0, 1) == doctest::Approx(all.grad.at(i, 1)).epsilon(1e-11));
    }
}

TEST_CASE("mismatched correction is rejected") {
    GaussianMixture base(2, 3, false);
    Rng rng(23);
    CorrectionConfig cfg;
    cfg.widths = {8};
    CorrectionNetwork wrong_dim(2, 2, cfg, rng);
    CHECK_THROWS_AS(GibbsModel(base, &wrong_dim), std::runtime_error);
    CorrectionNetwork wrong_m(3, 5, cfg, rng);
    CHECK_THROWS_AS(GibbsModel(base, &wrong_m), std::runtime_error);
    GibbsModel ok(base, nullptr);
    CHECK_THROWS_AS(ok.value_and_grad(Tensor::zeros(3, 2)), std::runtime_error);
}
