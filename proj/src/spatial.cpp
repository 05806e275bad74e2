#include "srae/spatial.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace srae {

namespace {
constexpr int kLeafSize = 8;
}

KdTree::KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0);
    if (!points_.empty()) {
        nodes_.reserve(2 * points_.size() / kLeafSize + 2);
        build(0, static_cast<int>(points_.size()), 0);
    }
}

int KdTree::build(int begin, int end, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({begin, end, -1, -1, 0, 0.0});
    if (end - begin <= kLeafSize) return id;

    Vec3 lo = points_[order_[begin]], hi = lo;
    for (int i = begin; i < end; ++i) {
        lo = lo.cwiseMin(points_[order_[i]]);
        hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    const int mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int a, int b) {
                         return points_[a][axis] < points_[b][axis] ||
                                (points_[a][axis] == points_[b][axis] && a < b);
                     });
    const double split = points_[order_[mid]][axis];
    const int left = build(begin, mid, depth + 1);
    const int right = build(mid, end, depth + 1);
    nodes_[id].left = left;
    nodes_[id].right = right;
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    return id;
}

void KdTree::search(int node_id, const Vec3& q, Hit& best) const {
    const Node& node = nodes_[node_id];
    if (node.left < 0) {
        for (int i = node.begin; i < node.end; ++i) {
            const int idx = order_[i];
            const double d = (points_[idx] - q).squaredNorm();
            // ties resolve to the lowest index so results do not depend on tree shape
            if (d < best.sq_dist || (d == best.sq_dist && idx < best.index)) {
                best.sq_dist = d;
                best.index = idx;
            }
        }
        return;
    }
    const double diff = q[node.axis] - node.split;
    const int near = diff < 0 ? node.left : node.right;
    const int far = diff < 0 ? node.right : node.left;
    search(near, q, best);
    if (diff * diff <= best.sq_dist) search(far, q, best);
}

KdTree::Hit KdTree::nearest(const Vec3& q) const {
    Hit best{-1, std::numeric_limits<double>::infinity()};
    if (!nodes_.empty()) search(0, q, best);
    return best;
}

// Real-Time Collision Detection, closest point on triangle by Voronoi region.
TrianglePoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    auto make = [&](double u, double v, double w) {
        TrianglePoint t;
        t.bary = {u, v, w};
        t.point = u * a + v * b + w * c;
        t.sq_dist = (t.point - p).squaredNorm();
        return t;
    };
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0 && d2 <= 0) return make(1, 0, 0);

    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3) return make(0, 1, 0);

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) {
        const double v = d1 / (d1 - d3);
        return make(1 - v, v, 0);
    }

    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6) return make(0, 0, 1);

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) {
        const double w = d2 / (d2 - d6);
        return make(1 - w, 0, w);
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return make(0, 1 - w, w);
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom, w = vc * denom;
    return make(1 - v - w, v, w);
}

TriangleBvh::TriangleBvh(std::span<const Vec3> vertices, std::span<const Face> faces)
    : vertices_(vertices.begin(), vertices.end()), faces_(faces.begin(), faces.end()) {
    order_.resize(faces_.size());
    std::iota(order_.begin(), order_.end(), 0);
    centroids_.reserve(faces_.size());
    for (const Face& f : faces_) {
        centroids_.push_back((vertices_[f[0]] + vertices_[f[1]] + vertices_[f[2]]) / 3.0);
    }
    if (!faces_.empty()) build(0, static_cast<int>(faces_.size()));
}

int TriangleBvh::build(int begin, int end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (int i = begin; i < end; ++i) {
        for (int v : faces_[order_[i]]) {
            lo = lo.cwiseMin(vertices_[v]);
            hi = hi.cwiseMax(vertices_[v]);
        }
    }
    nodes_[id].lo = lo;
    nodes_[id].hi = hi;
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    if (end - begin <= kLeafSize / 2) return id;

    Vec3 clo = centroids_[order_[begin]], chi = clo;
    for (int i = begin; i < end; ++i) {
        clo = clo.cwiseMin(centroids_[order_[i]]);
        chi = chi.cwiseMax(centroids_[order_[i]]);
    }
    int axis = 0;
    (chi - clo).maxCoeff(&axis);
    const int mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int a, int b) {
                         return centroids_[a][axis] < centroids_[b][axis] ||
                                (centroids_[a][axis] == centroids_[b][axis] && a < b);
                     });
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

namespace {
double box_sq_dist(const Vec3& q, const Vec3& lo, const Vec3& hi) {
    const Vec3 d = (lo - q).cwiseMax(q - hi).cwiseMax(Vec3::Zero());
    return d.squaredNorm();
}
}  // namespace

void TriangleBvh::search(int node_id, const Vec3& q, Hit& best) const {
    const Node& node = nodes_[node_id];
    if (node.left < 0) {
        for (int i = node.begin; i < node.end; ++i) {
            const int f = order_[i];
            const Face& t = faces_[f];
            TrianglePoint cp = closest_point_on_triangle(q, vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]);
            if (cp.sq_dist < best.closest.sq_dist ||
                (cp.sq_dist == best.closest.sq_dist && f < best.face)) {
                best.face = f;
                best.closest = cp;
            }
        }
        return;
    }
    const double dl = box_sq_dist(q, nodes_[node.left].lo, nodes_[node.left].hi);
    const double dr = box_sq_dist(q, nodes_[node.right].lo, nodes_[node.right].hi);
    const int first = dl <= dr ? node.left : node.right;
    const int second = dl <= dr ? node.right : node.left;
    const double d_first = std::min(dl, dr), d_second = std::max(dl, dr);
    if (d_first <= best.closest.sq_dist) search(first, q, best);
    if (d_second <= best.closest.sq_dist) search(second, q, best);
}

TriangleBvh::Hit TriangleBvh::closest(const Vec3& q) const {
    Hit best;
    best.closest.sq_dist = std::numeric_limits<double>::infinity();
    if (!nodes_.empty()) search(0, q, best);
    return best;
}

}  // namespace srae
