#include "mixent/stats_tests.hpp"

#include <cmath>
#include <stdexcept>

#include "mixent/knn.hpp"
#include "mixent/special.hpp"

namespace mixent {

ChiSquareResult chi_square_test(const std::vector<long>& counts, const std::vector<double>& probs,
                                double alpha) {
    if (counts.size() != probs.size() || counts.size() < 2)
        throw std::runtime_error("chi-square: need matching counts/probs with at least two cells");
    double total = 0.0, psum = 0.0;
    for (long c : counts) {
        if (c < 0) throw std::runtime_error("chi-square: negative count");
        total += static_cast<double>(c);
    }
    for (double p : probs) psum += p;
    if (std::abs(psum - 1.0) > 1e-6)
        throw std::runtime_error("chi-square: probabilities sum to " + std::to_string(psum));

    ChiSquareResult res;
    for (size_t i = 0; i < counts.size(); ++i) {
        const double expected = total * probs[i];
        if (expected < 5.0)
            throw std::runtime_error("chi-square: expected count " + std::to_string(expected) +
                                     " in cell " + std::to_string(i) +
                                     " is below 5; coarsen the grid");
        const double diff = static_cast<double>(counts[i]) - expected;
        res.statistic += diff * diff / expected;
    }
    res.df = static_cast<int>(counts.size()) - 1;
    res.critical = chi_squared_critical(res.df, alpha);
    res.pass = res.statistic <= res.critical;
    return res;
}

double two_sample_knn_pvalue(const Tensor& a, const Tensor& b, int k, int permutations, Rng& rng) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols())
        throw std::runtime_error("two-sample test: incompatible sample matrices");
    if (k < 1 || permutations < 19)
        throw std::runtime_error("two-sample test: need k >= 1 and enough permutations");
    const long na = a.rows(), nb = b.rows(), n = na + nb;
    if (na == 0 || nb == 0) throw std::runtime_error("two-sample test: empty sample");
    const int d = static_cast<int>(a.cols());

    Tensor pooled = Tensor::zeros(n, d);
    for (long i = 0; i < na; ++i)
        for (int j = 0; j < d; ++j) pooled.at(i, j) = a.at(i, j);
    for (long i = 0; i < nb; ++i)
        for (int j = 0; j < d; ++j) pooled.at(na + i, j) = b.at(i, j);

    // Neighbor lists once; the statistic under any labeling is then a scan.
    KdTree tree(pooled);
    std::vector<long> neighbors(static_cast<size_t>(n) * k);
    std::vector<double> q(d);
    std::vector<std::pair<double, long>> nn;
    for (long i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) q[j] = pooled.at(i, j);
        tree.nearest(q.data(), k, i, nn);
        for (int j = 0; j < k; ++j) neighbors[static_cast<size_t>(i) * k + j] = nn[j].second;
    }

    std::vector<int> labels(n);
    auto statistic = [&]() {
        long same = 0;
        for (long i = 0; i < n; ++i)
            for (int j = 0; j < k; ++j)
                same += labels[neighbors[static_cast<size_t>(i) * k + j]] == labels[i];
        return static_cast<double>(same) / static_cast<double>(static_cast<long>(n) * k);
    };

    for (long i = 0; i < n; ++i) labels[i] = i < na ? 0 : 1;
    const double observed = statistic();

    std::vector<long> order(n);
    for (long i = 0; i < n; ++i) order[i] = i;
    long at_least = 0;
    for (int p = 0; p < permutations; ++p) {
        rng.shuffle(order);
        for (long i = 0; i < n; ++i) labels[order[i]] = i < na ? 0 : 1;
        if (statistic() >= observed) ++at_least;
    }
    return static_cast<double>(1 + at_least) / static_cast<double>(1 + permutations);
}

}  // namespace mixent
