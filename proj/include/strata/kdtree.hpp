#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "strata/vec3.hpp"

namespace strata {

// Static 3D kd-tree for nearest-neighbor queries. Median split over the
// widest axis, leaves of a few points, iterative-free recursive search with
// the usual plane-distance pruning.
class KdTree {
public:
    explicit KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
        if (points_.empty()) {
            throw std::invalid_argument("KdTree: empty point set");
        }
        order_.resize(points_.size());
        std::iota(order_.begin(), order_.end(), 0);
        nodes_.reserve(points_.size() * 2);
        root_ = build(0, static_cast<int>(points_.size()));
    }

    struct Hit {
        int index = -1;
        double dist2 = std::numeric_limits<double>::infinity();
    };

    Hit nearest(const Vec3& q) const {
        Hit best;
        search(root_, q, best);
        return best;
    }

    // number of points within distance tau (early exit at the first hit when
    // any_within is what's needed)
    bool any_within(const Vec3& q, double tau) const {
        Hit best;
        best.dist2 = tau * tau;
        search_bounded(root_, q, best);
        return best.index >= 0;
    }

private:
    static constexpr int kLeafSize = 8;

    struct Node {
        int left = -1, right = -1;
        int begin = 0, end = 0;  // leaf range into order_
        int axis = -1;
        double split = 0.0;
    };

    std::vector<Vec3> points_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
    int root_ = -1;

    int build(int begin, int end) {
        Node node;
        node.begin = begin;
        node.end = end;
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back(node);
        if (end - begin <= kLeafSize) {
            return id;
        }
        Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
        for (int i = begin; i < end; ++i) {
            const Vec3& p = points_[order_[i]];
            lo = Vec3{std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
            hi = Vec3{std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
        }
        const Vec3 ext = hi - lo;
        int axis = 0;
        if (ext.y > ext.x) axis = 1;
        if (ext.z > (axis == 0 ? ext.x : ext.y)) axis = 2;
        if (ext[axis] == 0.0) {
            return id;  // all points coincide on every axis: keep as leaf
        }
        const int mid = (begin + end) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](int a, int b) { return points_[a][axis] < points_[b][axis]; });
        nodes_[id].axis = axis;
        nodes_[id].split = points_[order_[mid]][axis];
        const int left = build(begin, mid);
        const int right = build(mid, end);
        nodes_[id].left = left;
        nodes_[id].right = right;
        return id;
    }

    void scan_leaf(const Node& node, const Vec3& q, Hit& best) const {
        for (int i = node.begin; i < node.end; ++i) {
            const int idx = order_[i];
            const double d2 = distance2(points_[idx], q);
            if (d2 < best.dist2) {
                best.dist2 = d2;
                best.index = idx;
            }
        }
    }

    void search(int id, const Vec3& q, Hit& best) const {
        const Node& node = nodes_[id];
        if (node.axis < 0) {
            scan_leaf(node, q, best);
            return;
        }
        const double delta = q[node.axis] - node.split;
        const int near = delta < 0.0 ? node.left : node.right;
        const int far = delta < 0.0 ? node.right : node.left;
        search(near, q, best);
        if (delta * delta < best.dist2) {
            search(far, q, best);
        }
    }

    // like search but never relaxes the initial radius; used for any_within
    void search_bounded(int id, const Vec3& q, Hit& best) const {
        const Node& node = nodes_[id];
        if (node.axis < 0) {
            for (int i = node.begin; i < node.end; ++i) {
                const int idx = order_[i];
                const double d2 = distance2(points_[idx], q);
                if (d2 <= best.dist2) {
                    best.dist2 = d2;
                    best.index = idx;
                    return;
                }
            }
            return;
        }
        const double delta = q[node.axis] - node.split;
        const int near = delta < 0.0 ? node.left : node.right;
        const int far = delta < 0.0 ? node.right : node.left;
        search_bounded(near, q, best);
        if (best.index >= 0) return;
        if (delta * delta <= best.dist2) {
            search_bounded(far, q, best);
        }
    }
};

} // namespace strata
