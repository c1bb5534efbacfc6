#pragma once

#include <utility>
#include <vector>

#include "mixent/tensor.hpp"

namespace mixent {

// Exact Euclidean nearest-neighbor index: median-split k-d tree with
// bounding-box pruning. Exactness matters here — the neighbor distances feed
// entropy oracles that certify ground truth, so approximate search is out.
class KdTree {
public:
    explicit KdTree(const Tensor& points, long leaf_size = 24);

    long size() const { return n_; }
    int dim() const { return d_; }

    // The k nearest points to q (squared distances, ascending, with original
    // row indices). `exclude` skips one original row for self-queries; pass
    // -1 to keep everything. Throws if fewer than k candidates exist.
    void nearest(const double* q, int k, long exclude,
                 std::vector<std::pair<double, long>>& out) const;

    // Squared distances of every point within squared radius r2 of q
    // (inclusive). Order unspecified; out is cleared first.
    void within_dist2(const double* q, double r2, std::vector<double>& out) const;

    // Original row indices within squared radius r2 of q.
    void within(const double* q, double r2, std::vector<long>& out) const;

private:
    struct Node {
        long begin = 0, end = 0;    // range into the reordered point array
        long left = -1, right = -1; // children; -1 marks a leaf
        int split_dim = -1;
        std::vector<double> lo, hi; // bounding box
    };

    long build(long begin, long end, std::vector<long>& order, const Tensor& src);
    double box_dist2(const Node& node, const double* q) const;
    double point_dist2(long pos, const double* q) const;

    int d_ = 0;
    long n_ = 0, leaf_size_ = 24;
    std::vector<double> pts_;  // row-major, reordered for leaf locality
    std::vector<long> orig_;   // reordered position -> original row
    std::vector<Node> nodes_;
    long root_ = -1;
};

}  // namespace mixent
