#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "gcslam/se3.hpp"

namespace gcslam {

/// Exact 3D kd-tree over an externally owned point array. Ties on squared
/// distance are broken toward the smaller point index, which keeps every
/// query deterministic regardless of build or traversal order.
class KdTree3 {
public:
    struct Neighbor {
        int index = -1;
        double sq_dist = std::numeric_limits<double>::infinity();
    };

    KdTree3() = default;

    explicit KdTree3(const std::vector<Vec3>& points) { build(points); }

    void build(const std::vector<Vec3>& points) {
        points_ = &points;
        nodes_.clear();
        order_.resize(points.size());
        std::iota(order_.begin(), order_.end(), 0);
        nodes_.reserve(points.size());
        if (!points.empty()) root_ = build_range(0, static_cast<int>(points.size()));
    }

    bool empty() const { return points_ == nullptr || points_->empty(); }
    std::size_t size() const { return points_ ? points_->size() : 0; }

    Neighbor nearest(const Vec3& q) const {
        Neighbor best;
        if (!empty()) search_nearest(root_, q, best);
        return best;
    }

    /// k nearest neighbors, closest first.
    std::vector<Neighbor> knn(const Vec3& q, int k) const {
        std::vector<Neighbor> heap;
        if (!empty() && k > 0) {
            heap.reserve(static_cast<std::size_t>(k) + 1);
            search_knn(root_, q, k, heap);
            std::sort(heap.begin(), heap.end(), neighbor_less);
        }
        return heap;
    }

    /// All points with squared distance <= sq_radius, sorted by index.
    std::vector<Neighbor> radius(const Vec3& q, double sq_radius) const {
        std::vector<Neighbor> out;
        if (!empty()) search_radius(root_, q, sq_radius, out);
        std::sort(out.begin(), out.end(),
                  [](const Neighbor& a, const Neighbor& b) { return a.index < b.index; });
        return out;
    }

private:
    struct Node {
        int point = -1;
        int axis = 0;
        int left = -1;
        int right = -1;
    };

    static bool neighbor_less(const Neighbor& a, const Neighbor& b) {
        if (a.sq_dist != b.sq_dist) return a.sq_dist < b.sq_dist;
        return a.index < b.index;
    }

    int build_range(int begin, int end) {
        const auto& pts = *points_;
        Vec3 lo = pts[order_[begin]], hi = lo;
        for (int i = begin + 1; i < end; ++i) {
            lo = lo.cwiseMin(pts[order_[i]]);
            hi = hi.cwiseMax(pts[order_[i]]);
        }
        int axis = 0;
        const Vec3 extent = hi - lo;
        if (extent.y() > extent.x()) axis = 1;
        if (extent.z() > extent[axis]) axis = 2;

        const int mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](int a, int b) {
                             if (pts[a][axis] != pts[b][axis]) return pts[a][axis] < pts[b][axis];
                             return a < b;
                         });

        Node node;
        node.point = order_[mid];
        node.axis = axis;
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back(node);
        if (mid > begin) nodes_[id].left = build_range(begin, mid);
        if (mid + 1 < end) nodes_[id].right = build_range(mid + 1, end);
        return id;
    }

    void consider(int point, const Vec3& q, Neighbor& best) const {
        const double d = ((*points_)[point] - q).squaredNorm();
        if (d < best.sq_dist || (d == best.sq_dist && point < best.index)) {
            best.index = point;
            best.sq_dist = d;
        }
    }

    void search_nearest(int node_id, const Vec3& q, Neighbor& best) const {
        const Node& node = nodes_[node_id];
        consider(node.point, q, best);
        const double delta = q[node.axis] - (*points_)[node.point][node.axis];
        const int near = delta <= 0.0 ? node.left : node.right;
        const int far = delta <= 0.0 ? node.right : node.left;
        if (near >= 0) search_nearest(near, q, best);
        if (far >= 0 && delta * delta <= best.sq_dist) search_nearest(far, q, best);
    }

    void search_knn(int node_id, const Vec3& q, int k, std::vector<Neighbor>& heap) const {
        const Node& node = nodes_[node_id];
        const Neighbor cand{node.point, ((*points_)[node.point] - q).squaredNorm()};
        if (static_cast<int>(heap.size()) < k) {
            heap.push_back(cand);
            std::push_heap(heap.begin(), heap.end(), neighbor_less);
        } else if (neighbor_less(cand, heap.front())) {
            std::pop_heap(heap.begin(), heap.end(), neighbor_less);
            heap.back() = cand;
            std::push_heap(heap.begin(), heap.end(), neighbor_less);
        }
        const double delta = q[node.axis] - (*points_)[node.point][node.axis];
        const int near = delta <= 0.0 ? node.left : node.right;
        const int far = delta <= 0.0 ? node.right : node.left;
        if (near >= 0) search_knn(near, q, k, heap);
        const bool full = static_cast<int>(heap.size()) >= k;
        if (far >= 0 && (!full || delta * delta <= heap.front().sq_dist))
            search_knn(far, q, k, heap);
    }

    void search_radius(int node_id, const Vec3& q, double sq_radius,
                       std::vector<Neighbor>& out) const {
        const Node& node = nodes_[node_id];
        const double d = ((*points_)[node.point] - q).squaredNorm();
        if (d <= sq_radius) out.push_back({node.point, d});
        const double delta = q[node.axis] - (*points_)[node.point][node.axis];
        const int near = delta <= 0.0 ? node.left : node.right;
        const int far = delta <= 0.0 ? node.right : node.left;
        if (near >= 0) search_radius(near, q, sq_radius, out);
        if (far >= 0 && delta * delta <= sq_radius) search_radius(far, q, sq_radius, out);
    }

    const std::vector<Vec3>* points_ = nullptr;
    std::vector<int> order_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

}  // namespace gcslam
