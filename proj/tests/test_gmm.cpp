#include <cmath>
#include <vector>

#include "doctest.h"
#include "mixent/gmm.hpp"
#include "mixent/gradcheck.hpp"
#include "mixent/rng.hpp"

using namespace mixent;

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;

double phi1(double x, double mu, double prec_scale) {
    // N(x; mu, sigma) with L = prec_scale (1-d): log N = log L - 0.5 log2pi - 0.5 (L(x-mu))^2
    const double y = prec_scale * (x - mu);
    return std::log(prec_scale) - 0.5 * kLog2Pi - 0.5 * y * y;
}
}  // namespace

TEST_CASE("single standard normal log density at the origin") {
    GaussianMixture gm(1, 1, false);
    Tensor x = Tensor::zeros(1, 1);
    CHECK(gm.log_density(x).at(0) == doctest::Approx(-0.5 * kLog2Pi).epsilon(1e-14));
    // -0.918938533204672741... is the textbook value
    CHECK(gm.log_density(x).at(0) == doctest::Approx(-0.9189385332046727).epsilon(1e-14));
}

TEST_CASE("two identical components collapse to one") {
    GaussianMixture one(1, 2, false);
    GaussianMixture two(2, 2, false);
    Rng r(5);
    // Shared random parameters for the single component.
    Tensor mean = Tensor::zeros(1, 2), packed = Tensor::zeros(1, 3);
    r.fill_normal(mean);
    r.fill_normal(packed);
    one.params().value("means") = mean;
    one.params().value("scales") = packed;
    Tensor means2 = Tensor::zeros(2, 2), packed2 = Tensor::zeros(2, 3);
    for (int c = 0; c < 2; ++c)
        for (int j = 0; j < 2; ++j) means2.at(c, j) = mean.at(0, j);
    for (int c = 0; c < 2; ++c)
        for (int j = 0; j < 3; ++j) packed2.at(c, j) = packed.at(0, j);
    two.params().value("means") = means2;
    two.params().value("scales") = packed2;

    Tensor X = Tensor::zeros(50, 2);
    r.fill_normal(X);
    Tensor la = one.log_density(X), lb = two.log_density(X);
    for (long i = 0; i < X.rows(); ++i) CHECK(la.at(i) == doctest::Approx(lb.at(i)).epsilon(1e-13));
}

TEST_CASE("equal-weight bimodal density matches the hand formula") {
    GaussianMixture gm(2, 1, false);
    Tensor& means = gm.params().value("means");
    means.at(0, 0) = -2.0;
    means.at(1, 0) = 2.0;
    // unit precisions, equal weights already zero-initialized
    auto expect = [&](double x) {
        return mixent::logsumexp(std::vector<double>{std::log(0.5) + phi1(x, -2.0, 1.0),
                                                     std::log(0.5) + phi1(x, 2.0, 1.0)}
                                     .data(),
                                 2);
    };
    Tensor X = Tensor::zeros(3, 1);
    X.at(0, 0) = 0.0;
    X.at(1, 0) = 1.0;
    X.at(2, 0) = -3.7;
    Tensor ld = gm.log_density(X);
    for (long i = 0; i < 3; ++i) CHECK(ld.at(i) == doctest::Approx(expect(X.at(i, 0))).epsilon(1e-13));
    // At the symmetry point both components contribute phi(2).
    CHECK(ld.at(0) == doctest::Approx(-2.0 - 0.5 * kLog2Pi).epsilon(1e-13));
}

TEST_CASE("full-covariance log density matches a scalar evaluation") {
    GaussianMixture gm(1, 2, false);
    Tensor& means = gm.params().value("means");
    Tensor& scales = gm.params().value("scales");
    const double a = 0.3, b = -0.7, c = -0.2;
    means.at(0, 0) = 0.5;
    means.at(0, 1) = -1.0;
    scales.at(0, 0) = a;   // log L00
    scales.at(0, 1) = b;   // L10
    scales.at(0, 2) = c;   // log L11
    Tensor X = Tensor::zeros(1, 2);
    X.at(0, 0) = 1.0;
    X.at(0, 1) = 2.0;
    const double dx0 = 0.5, dx1 = 3.0;
    const double y0 = std::exp(a) * dx0;
    const double y1 = b * dx0 + std::exp(c) * dx1;
    const double expect = -kLog2Pi + (a + c) - 0.5 * (y0 * y0 + y1 * y1);
    CHECK(gm.log_density(X).at(0) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("densities integrate to one (1-d quadrature)") {
    GaussianMixture gm(3, 1, false);
    Tensor& means = gm.params().value("means");
    Tensor& scales = gm.params().value("scales");
    Tensor& w = gm.params().value("weights");
    means.at(0, 0) = -2.0;
    means.at(1, 0) = 0.5;
    means.at(2, 0) = 3.0;
    scales.at(0, 0) = 0.4;
    scales.at(1, 0) = -0.3;
    scales.at(2, 0) = 0.9;
    w.at(0) = 0.2;
    w.at(1) = -0.5;
    w.at(2) = 0.1;
    // Composite Simpson over [-30, 30].
    const long n = 32768;
    const double lo = -30.0, hi = 30.0, h = (hi - lo) / n;
    Tensor grid = Tensor::zeros(n + 1, 1);
    for (long i = 0; i <= n; ++i) grid.at(i, 0) = lo + h * i;
    Tensor ld = gm.log_density(grid);
    double integral = 0.0;
    for (long i = 0; i <= n; ++i) {
        const double wgt = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        integral += wgt * std::exp(ld.at(i));
    }
    integral *= h / 3.0;
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("sampling matches the precision parametrization") {
    // Correlated 2-d Gaussian: packed [a, b, c] -> L = [[e^a,0],[b,e^c]],
    // covariance (L^T L)^{-1} computed here by direct inversion.
    GaussianMixture gm(1, 2, false);
    Tensor& scales = gm.params().value("scales");
    const double a = 0.0, b = -0.8, c = -0.3;
    scales.at(0, 0) = a;
    scales.at(0, 1) = b;
    scales.at(0, 2) = c;
    const double L00 = std::exp(a), L10 = b, L11 = std::exp(c);
    // Lambda = L^T L
    const double p00 = L00 * L00 + L10 * L10, p01 = L10 * L11, p11 = L11 * L11;
    const double det = p00 * p11 - p01 * p01;
    const double s00 = p11 / det, s01 = -p01 / det, s11 = p00 / det;

    Rng r(123);
    Tensor S = gm.sample(100000, r);
    double m0 = 0, m1 = 0;
    for (long i = 0; i < S.rows(); ++i) {
        m0 += S.at(i, 0);
        m1 += S.at(i, 1);
    }
    m0 /= S.rows();
    m1 /= S.rows();
    double c00 = 0, c01 = 0, c11 = 0;
    for (long i = 0; i < S.rows(); ++i) {
        const double u = S.at(i, 0) - m0, v = S.at(i, 1) - m1;
        c00 += u * u;
        c01 += u * v;
        c11 += v * v;
    }
    c00 /= S.rows();
    c01 /= S.rows();
    c11 /= S.rows();
    CHECK(std::fabs(m0) < 0.02);
    CHECK(std::fabs(m1) < 0.03);
    CHECK(c00 == doctest::Approx(s00).epsilon(0.05));
    CHECK(c01 == doctest::Approx(s01).epsilon(0.08));
    CHECK(c11 == doctest::Approx(s11).epsilon(0.05));
}

TEST_CASE("a dominant weight logit routes all samples to its component") {
    GaussianMixture gm(2, 1, false);
    gm.params().value("means").at(0, 0) = 5.0;
    gm.params().value("means").at(1, 0) = -5.0;
    gm.params().value("weights").at(0) = 30.0;
    Rng r(9);
    Tensor S = gm.sample(1000, r);
    for (long i = 0; i < S.rows(); ++i) CHECK(S.at(i, 0) > 0.0);
}

TEST_CASE("responsibilities follow Bayes rule") {
    GaussianMixture gm(2, 1, false);
    Tensor& means = gm.params().value("means");
    Tensor& scales = gm.params().value("scales");
    Tensor& w = gm.params().value("weights");
    means.at(0, 0) = -1.0;
    means.at(1, 0) = 2.0;
    scales.at(0, 0) = 0.25;
    scales.at(1, 0) = -0.5;
    w.at(0) = 0.7;
    w.at(1) = -0.1;

    Tensor X = Tensor::zeros(5, 1);
    X.at(0, 0) = -1.5;
    X.at(1, 0) = 0.0;
    X.at(2, 0) = 0.8;
    X.at(3, 0) = 2.0;
    X.at(4, 0) = 4.0;
    Tensor R = gm.responsibilities(X, true);
    // Independent Bayes computation.
    const double lw0 = 0.7 - mixent::logsumexp(std::vector<double>{0.7, -0.1}.data(), 2);
    const double lw1 = -0.1 - mixent::logsumexp(std::vector<double>{0.7, -0.1}.data(), 2);
    for (long i = 0; i < X.rows(); ++i) {
        const double s0 = lw0 + phi1(X.at(i, 0), -1.0, std::exp(0.25));
        const double s1 = lw1 + phi1(X.at(i, 0), 2.0, std::exp(-0.5));
        const double z = mixent::logsumexp(std::vector<double>{s0, s1}.data(), 2);
        CHECK(R.at(i, 0) == doctest::Approx(std::exp(s0 - z)).epsilon(1e-12));
        CHECK(R.at(i, 1) == doctest::Approx(std::exp(s1 - z)).epsilon(1e-12));
        CHECK(R.at(i, 0) + R.at(i, 1) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("single component responsibilities are exactly one") {
    GaussianMixture gm(1, 3, true);
    Rng r(2);
    Tensor X = Tensor::zeros(20, 3);
    r.fill_normal(X);
    Tensor R = gm.responsibilities(X, true);
    for (long i = 0; i < X.rows(); ++i) CHECK(R.at(i, 0) == 1.0);
}

TEST_CASE("midpoint of a symmetric pair splits responsibilities evenly") {
    GaussianMixture gm(2, 1, false);
    gm.params().value("means").at(0, 0) = -1.0;
    gm.params().value("means").at(1, 0) = 1.0;
    Tensor X = Tensor::zeros(1, 1);
    Tensor R = gm.responsibilities(X, true);
    CHECK(R.at(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(R.at(0, 1) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("the det-term flag changes the posterior exactly as derived") {
    // Same means, very different scales: with the det term the sharper
    // component wins at the shared mean; without it they tie.
    GaussianMixture gm(2, 1, false);
    gm.params().value("scales").at(0, 0) = 1.5;  // sharp
    gm.params().value("scales").at(1, 0) = -1.0; // broad
    Tensor X = Tensor::zeros(1, 1);
    Tensor Rt = gm.responsibilities(X, true);
    Tensor Rf = gm.responsibilities(X, false);
    const double z = std::exp(1.5) / (std::exp(1.5) + std::exp(-1.0));
    CHECK(Rt.at(0, 0) == doctest::Approx(z).epsilon(1e-12));
    CHECK(Rf.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("component permutation leaves the density unchanged") {
    Rng r(77);
    GaussianMixture gm(3, 2, false);
    r.fill_normal(gm.params().value("weights"));
    r.fill_normal(gm.params().value("means"));
    r.fill_normal(gm.params().value("scales"));
    GaussianMixture perm(3, 2, false);
    const int p[3] = {2, 0, 1};
    for (int j = 0; j < 3; ++j) {
        perm.params().value("weights").at(j) = gm.params().value("weights").at(p[j]);
        for (int k = 0; k < 2; ++k) perm.params().value("means").at(j, k) = gm.params().value("means").at(p[j], k);
        for (int k = 0; k < 3; ++k) perm.params().value("scales").at(j, k) = gm.params().value("scales").at(p[j], k);
    }
    Tensor X = Tensor::zeros(40, 2);
    r.fill_normal(X);
    Tensor la = gm.log_density(X), lb = perm.log_density(X);
    for (long i = 0; i < X.rows(); ++i) CHECK(la.at(i) == doctest::Approx(lb.at(i)).epsilon(1e-12));
}

TEST_CASE("cross-entropy training gradients match finite differences") {
    Rng r(31);
    Tensor X = Tensor::zeros(40, 2);
    r.fill_normal(X);
    GaussianMixture gm = GaussianMixture::init_from_data(X, 3, false, r);
    auto rep = finite_difference_check(gm.params(), [&](Tape& t, const std::vector<Var>& p) {
        GaussianMixture::MixtureVars mv{p[0], p[1], p[2]};
        return t.neg(t.mean(gm.log_density_graph(t, mv, t.constant(X))));
    });
    CHECK_MESSAGE(rep.max_rel_err < 1e-5, "slot ", rep.worst_slot);
}

TEST_CASE("fitting a standard normal recovers mean, covariance, and entropy") {
    Rng r(2024);
    const long n = 50000;
    Tensor X = Tensor::zeros(n, 2), V = Tensor::zeros(10000, 2);
    r.fill_normal(X);
    r.fill_normal(V);
    GaussianMixture gm = GaussianMixture::init_from_data(X, 1, false, r);
    MixtureTrainOptions opts;
    opts.epochs = 20;
    opts.adam.lr = 0.01;
    opts.adam.weight_decay = 0.0;
    auto curve = gm.train_cross_entropy(X, V, opts, r);
    REQUIRE(curve.size() == 20);

    const Tensor& mu = gm.params().value("means");
    CHECK(std::fabs(mu.at(0, 0)) < 0.05);
    CHECK(std::fabs(mu.at(0, 1)) < 0.05);
    // Covariance from the precision factor.
    const Tensor& sc = gm.params().value("scales");
    const double L00 = std::exp(sc.at(0, 0)), L10 = sc.at(0, 1), L11 = std::exp(sc.at(0, 2));
    const double p00 = L00 * L00 + L10 * L10, p01 = L10 * L11, p11 = L11 * L11;
    const double det = p00 * p11 - p01 * p01;
    CHECK(std::fabs(p11 / det - 1.0) < 0.1);
    CHECK(std::fabs(p00 / det - 1.0) < 0.1);
    CHECK(std::fabs(-p01 / det) < 0.05);

    // Cross-entropy on held-out data approximates H = log(2 pi e) = 2.8379.
    const double H = std::log(2.0 * M_PI * std::exp(1.0));
    const double ce = curve.back().val_loss;
    CHECK(std::fabs(ce - H) < 0.02);
    // And it is an upper bound up to sampling error.
    CHECK(ce > H - 0.02);
    // Training reduced the loss.
    CHECK(curve.back().train_loss < curve.front().train_loss);
}

TEST_CASE("a single Gaussian cannot reach zero cross-entropy on a uniform box") {
    // The best Gaussian fit to U[-0.5, 0.5]^2 has cross-entropy
    // log(2 pi e / 12) = 0.3531 > 0 = H(U).
    Rng r(55);
    const long n = 20000;
    Tensor X = Tensor::zeros(n, 2), V = Tensor::zeros(5000, 2);
    for (long i = 0; i < n; ++i)
        for (int j = 0; j < 2; ++j) X.at(i, j) = r.uniform() - 0.5;
    for (long i = 0; i < V.rows(); ++i)
        for (int j = 0; j < 2; ++j) V.at(i, j) = r.uniform() - 0.5;
    GaussianMixture gm = GaussianMixture::init_from_data(X, 1, false, r);
    MixtureTrainOptions opts;
    opts.epochs = 10;
    opts.adam.lr = 0.01;
    opts.adam.weight_decay = 0.0;
    auto curve = gm.train_cross_entropy(X, V, opts, r);
    CHECK(curve.back().val_loss > 0.1);
    CHECK(curve.back().val_loss == doctest::Approx(std::log(2.0 * M_PI * std::exp(1.0) / 12.0)).epsilon(0.1));
}

TEST_CASE("training is deterministic given the seed") {
    auto run = [](uint64_t seed) {
        Rng r(seed);
        Tensor X = Tensor::zeros(2000, 2), V = Tensor::zeros(500, 2);
        r.fill_normal(X);
        r.fill_normal(V);
        GaussianMixture gm = GaussianMixture::init_from_data(X, 4, false, r);
        MixtureTrainOptions opts;
        opts.epochs = 3;
        auto curve = gm.train_cross_entropy(X, V, opts, r);
        return std::make_pair(gm.params().value("means"), curve);
    };
    auto [m1, c1] = run(42);
    auto [m2, c2] = run(42);
    for (long i = 0; i < m1.size(); ++i) CHECK(m1.at(i) == m2.at(i));
    for (size_t e = 0; e < c1.size(); ++e) {
        CHECK(c1[e].train_loss == c2[e].train_loss);
        CHECK(c1[e].val_loss == c2[e].val_loss);
    }
    auto [m3, c3] = run(43);
    bool differs = false;
    for (long i = 0; i < m1.size(); ++i) differs = differs || (m1.at(i) != m3.at(i));
    CHECK(differs);
}

TEST_CASE("zero training epochs change nothing") {
    Rng r(1);
    Tensor X = Tensor::zeros(100, 2);
    r.fill_normal(X);
    GaussianMixture gm = GaussianMixture::init_from_data(X, 2, false, r);
    Tensor before = gm.params().value("means");
    MixtureTrainOptions opts;
    opts.epochs = 0;
    auto curve = gm.train_cross_entropy(X, X, opts, r);
    CHECK(curve.empty());
    for (long i = 0; i < before.size(); ++i) CHECK(gm.params().value("means").at(i) == before.at(i));
}

TEST_CASE("diagonal mode agrees with full mode when off-diagonals are zero") {
    Rng r(8);
    GaussianMixture full(2, 3, false);
    GaussianMixture diag(2, 3, true);
    r.fill_normal(full.params().value("weights"));
    r.fill_normal(full.params().value("means"));
    diag.params().value("weights") = full.params().value("weights");
    diag.params().value("means") = full.params().value("means");
    Tensor dscales = Tensor::zeros(2, 3);
    r.fill_normal(dscales);
    diag.params().value("scales") = dscales;
    // Pack the same diagonals into the full representation.
    Tensor& fs = full.params().value("scales");
    for (int c = 0; c < 2; ++c) {
        long k = 0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j <= i; ++j, ++k) fs.at(c, k) = (i == j) ? dscales.at(c, i) : 0.0;
    }
    Tensor X = Tensor::zeros(30, 3);
    r.fill_normal(X);
    Tensor la = full.log_density(X), lb = diag.log_density(X);
    for (long i = 0; i < X.rows(); ++i) CHECK(la.at(i) == doctest::Approx(lb.at(i)).epsilon(1e-13));
    // Sampling agrees in distribution: same seed, same draws.
    Rng s1(3), s2(3);
    Tensor A = full.sample(200, s1), B = diag.sample(200, s2);
    for (long i = 0; i < A.size(); ++i) CHECK(A.at(i) == doctest::Approx(B.at(i)).epsilon(1e-13));
}
