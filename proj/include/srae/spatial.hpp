#pragma once

#include <array>
#include <span>
#include <vector>

#include "srae/mesh.hpp"

namespace srae {

/// Static 3-d tree over a point set; exact nearest-neighbour queries.
class KdTree {
public:
    explicit KdTree(std::span<const Vec3> points);

    struct Hit {
        int index = -1;
        double sq_dist = 0.0;
    };
    Hit nearest(const Vec3& q) const;
    std::size_t size() const { return points_.size(); }

private:
    struct Node {
        int begin, end;     // range in order_
        int left, right;    // children, -1 for leaves
        int axis;
        double split;
    };
    int build(int begin, int end, int depth);
    void search(int node, const Vec3& q, Hit& best) const;

    std::vector<Vec3> points_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
};

/// Closest point on triangle (a,b,c) to p, with barycentric weights of that point.
struct TrianglePoint {
    Vec3 point;
    std::array<double, 3> bary;
    double sq_dist;
};
TrianglePoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Axis-aligned bounding-volume hierarchy over triangles for closest-point queries.
class TriangleBvh {
public:
    TriangleBvh(std::span<const Vec3> vertices, std::span<const Face> faces);

    struct Hit {
        int face = -1;
        TrianglePoint closest;
    };
    Hit closest(const Vec3& q) const;

private:
    struct Node {
        Vec3 lo, hi;
        int left = -1, right = -1;
        int begin = 0, end = 0;
    };
    int build(int begin, int end);
    void search(int node, const Vec3& q, Hit& best) const;

    std::vector<Vec3> vertices_;
    std::vector<Face> faces_;
    std::vector<int> order_;
    std::vector<Vec3> centroids_;
    std::vector<Node> nodes_;
};

}  // namespace srae
