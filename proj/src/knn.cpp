#include "mixent/knn.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

namespace mixent {

KdTree::KdTree(const Tensor& points, long leaf_size) : leaf_size_(leaf_size) {
    if (points.rank() != 2 || points.rows() == 0)
        throw std::runtime_error("kdtree: need a nonempty point matrix, got " + points.shape_str());
    if (!points.all_finite()) throw std::runtime_error("kdtree: non-finite coordinates");
    if (leaf_size_ < 1) leaf_size_ = 1;
    n_ = points.rows();
    d_ = static_cast<int>(points.cols());

    std::vector<long> order(n_);
    for (long i = 0; i < n_; ++i) order[i] = i;
    nodes_.reserve(static_cast<size_t>(2 * (n_ / leaf_size_ + 2)));
    root_ = build(0, n_, order, points);

    // Materialize points in tree order so leaf scans stay contiguous.
    pts_.resize(static_cast<size_t>(n_) * d_);
    orig_ = order;
    for (long i = 0; i < n_; ++i)
        for (int j = 0; j < d_; ++j) pts_[static_cast<size_t>(i) * d_ + j] = points.at(order[i], j);
}

long KdTree::build(long begin, long end, std::vector<long>& order, const Tensor& src) {
    Node node;
    node.begin = begin;
    node.end = end;
    node.lo.assign(d_, 0.0);
    node.hi.assign(d_, 0.0);
    for (int j = 0; j < d_; ++j) {
        double lo = src.at(order[begin], j), hi = lo;
        for (long i = begin + 1; i < end; ++i) {
            const double v = src.at(order[i], j);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        node.lo[j] = lo;
        node.hi[j] = hi;
    }

    const long id = static_cast<long>(nodes_.size());
    nodes_.push_back(std::move(node));
    if (end - begin <= leaf_size_) return id;

    // Split the widest extent at its median; a zero extent means all points
    // coincide and the node stays a leaf.
    int dim = 0;
    double spread = -1.0;
    for (int j = 0; j < d_; ++j) {
        const double s = nodes_[id].hi[j] - nodes_[id].lo[j];
        if (s > spread) {
            spread = s;
            dim = j;
        }
    }
    if (spread <= 0.0) return id;

    const long mid = begin + (end - begin) / 2;
    std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end,
                     [&](long a, long b) { return src.at(a, dim) < src.at(b, dim); });
    nodes_[id].split_dim = dim;
    const long left = build(begin, mid, order, src);
    const long right = build(mid, end, order, src);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

double KdTree::box_dist2(const Node& node, const double* q) const {
    double s = 0.0;
    for (int j = 0; j < d_; ++j) {
        double excess = 0.0;
        if (q[j] < node.lo[j])
            excess = node.lo[j] - q[j];
        else if (q[j] > node.hi[j])
            excess = q[j] - node.hi[j];
        s += excess * excess;
    }
    return s;
}

double KdTree::point_dist2(long pos, const double* q) const {
    const double* p = pts_.data() + static_cast<size_t>(pos) * d_;
    double s = 0.0;
    for (int j = 0; j < d_; ++j) {
        const double diff = p[j] - q[j];
        s += diff * diff;
    }
    return s;
}

namespace {
using HeapEntry = std::pair<double, long>;  // (dist2, original row), max-heap
}

void KdTree::nearest(const double* q, int k, long exclude,
                     std::vector<std::pair<double, long>>& out) const {
    const long avail = n_ - ((exclude >= 0 && exclude < n_) ? 1 : 0);
    if (k < 1 || k > avail)
        throw std::runtime_error("kdtree nearest: k = " + std::to_string(k) + " with " +
                                 std::to_string(avail) + " candidates");
    std::priority_queue<HeapEntry> heap;

    // Iterative DFS, nearer child first, pruned by the current k-th distance.
    std::vector<long> stack{root_};
    while (!stack.empty()) {
        const long id = stack.back();
        stack.pop_back();
        const Node& node = nodes_[id];
        if (static_cast<int>(heap.size()) == k && box_dist2(node, q) > heap.top().first) continue;
        if (node.left < 0) {
            for (long i = node.begin; i < node.end; ++i) {
                if (orig_[i] == exclude) continue;
                const double d2 = point_dist2(i, q);
                if (static_cast<int>(heap.size()) < k)
                    heap.emplace(d2, orig_[i]);
                else if (d2 < heap.top().first) {
                    heap.pop();
                    heap.emplace(d2, orig_[i]);
                }
            }
        } else {
            const int dim = node.split_dim;
            const bool left_first = q[dim] <= nodes_[node.left].hi[dim];
            // push the far child first so the near child is explored next
            stack.push_back(left_first ? node.right : node.left);
            stack.push_back(left_first ? node.left : node.right);
        }
    }
    out.resize(heap.size());
    for (long i = static_cast<long>(out.size()) - 1; i >= 0; --i) {
        out[i] = heap.top();
        heap.pop();
    }
}

void KdTree::within_dist2(const double* q, double r2, std::vector<double>& out) const {
    out.clear();
    std::vector<long> stack{root_};
    while (!stack.empty()) {
        const long id = stack.back();
        stack.pop_back();
        const Node& node = nodes_[id];
        if (box_dist2(node, q) > r2) continue;
        if (node.left < 0) {
            for (long i = node.begin; i < node.end; ++i) {
                const double d2 = point_dist2(i, q);
                if (d2 <= r2) out.push_back(d2);
            }
        } else {
            stack.push_back(node.left);
            stack.push_back(node.right);
        }
    }
}

void KdTree::within(const double* q, double r2, std::vector<long>& out) const {
    out.clear();
    std::vector<long> stack{root_};
    while (!stack.empty()) {
        const long id = stack.back();
        stack.pop_back();
        const Node& node = nodes_[id];
        if (box_dist2(node, q) > r2) continue;
        if (node.left < 0) {
            for (long i = node.begin; i < node.end; ++i)
                if (point_dist2(i, q) <= r2) out.push_back(orig_[i]);
        } else {
            stack.push_back(node.left);
            stack.push_back(node.right);
        }
    }
}

}  // namespace mixent
