#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <tuple>

#include <Eigen/Dense>

#include "srae/errors.hpp"
#include "srae/remesh.hpp"

namespace srae {

Quadric plane_quadric(const Vec3& n, const Vec3& a, double weight) {
    const Eigen::Vector4d p(n.x(), n.y(), n.z(), -n.dot(a));
    Quadric q;
    q.m = weight * (p * p.transpose());
    return q;
}

std::vector<Quadric> compute_vertex_quadrics(const TriMesh& mesh) {
    std::vector<Quadric> qs(mesh.vertices.size());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const Face& t = mesh.faces[f];
        const Vec3& a = mesh.vertices[t[0]];
        const Vec3 c = (mesh.vertices[t[1]] - a).cross(mesh.vertices[t[2]] - a);
        const double len = c.norm();
        if (!(len > 0.0)) throw ValidationError("zero-area face " + std::to_string(f));
        const Quadric q = plane_quadric(c / len, a, 0.5 * len);
        for (int v : t) qs[v] += q;
    }
    return qs;
}

CollapseCost collapse_cost(const Vec3& pa, const Vec3& pb, const Quadric& qa, const Quadric& qb,
                           double lambda_edge) {
    const Quadric q = qa + qb;
    const Eigen::Matrix3d A = q.m.topLeftCorner<3, 3>();
    const Vec3 b = q.m.topRightCorner<3, 1>();
    CollapseCost out{};
    if (std::abs(A.determinant()) < 1e-12) {
        out.position = 0.5 * (pa + pb);
        out.singular = true;
    } else {
        out.position = A.fullPivLu().solve(-b);
        out.singular = false;
    }
    out.cost = q.eval(out.position) + lambda_edge * (pa - pb).squaredNorm();
    return out;
}

CollapseCost collapse_cost(const TriMesh& mesh, std::span<const Quadric> quadrics,
                           std::array<int, 2> edge, double lambda_edge) {
    return collapse_cost(mesh.vertices[edge[0]], mesh.vertices[edge[1]], quadrics[edge[0]],
                         quadrics[edge[1]], lambda_edge);
}

namespace {

// Boundary edges get a perpendicular constraint plane so collapses keep the outline in place.
constexpr double kBoundaryPlaneWeight = 10.0;

class Collapser {
public:
    Collapser(const TriMesh& mesh, double lambda_edge)
        : pos_(mesh.vertices), faces_(mesh.faces), lambda_(lambda_edge) {
        face_alive_.assign(faces_.size(), 1);
        vert_alive_.assign(pos_.size(), 1);
        version_.assign(pos_.size(), 0);
        vfaces_.assign(pos_.size(), {});
        for (std::size_t f = 0; f < faces_.size(); ++f) {
            for (int v : faces_[f]) vfaces_[v].push_back(static_cast<int>(f));
        }
        alive_faces_ = faces_.size();
        quadrics_ = compute_vertex_quadrics(mesh);
        add_boundary_quadrics();
    }

    SimplifyResult run(std::size_t target) {
        SimplifyResult res;
        for (std::size_t v = 0; v < pos_.size(); ++v) {
            for (int u : neighbors(static_cast<int>(v))) {
                if (static_cast<int>(v) < u) push(static_cast<int>(v), u);
            }
        }
        while (alive_faces_ > target) {
            if (heap_.empty()) {
                res.reached_target = false;
                break;
            }
            const Entry e = heap_.top();
            heap_.pop();
            const auto [cost, a, b, va, vb] = e;
            if (!vert_alive_[a] || !vert_alive_[b]) continue;
            if (version_[a] != va || version_[b] != vb) continue;
            Vec3 p;
            if (!placement(a, b, p)) continue;
            if (!collapse_allowed(a, b, p)) continue;
            collapse(a, b, p);
            ++res.collapses;
        }
        res.mesh = compact();
        return res;
    }

private:
    using Entry = std::tuple<double, int, int, unsigned, unsigned>;

    void add_boundary_quadrics() {
        for (std::size_t f = 0; f < faces_.size(); ++f) {
            const Face& t = faces_[f];
            const Vec3 n = (pos_[t[1]] - pos_[t[0]]).cross(pos_[t[2]] - pos_[t[0]]).normalized();
            for (int k = 0; k < 3; ++k) {
                const int a = t[k], b = t[(k + 1) % 3];
                if (shared_faces(a, b).size() != 1) continue;
                const Vec3 dir = pos_[b] - pos_[a];
                const Vec3 pn = dir.cross(n).normalized();
                const Quadric q = plane_quadric(pn, pos_[a], kBoundaryPlaneWeight * dir.squaredNorm());
                quadrics_[a] += q;
                quadrics_[b] += q;
            }
        }
    }

    std::vector<int> shared_faces(int a, int b) const {
        std::vector<int> out;
        for (int f : vfaces_[a]) {
            const Face& t = faces_[f];
            if (t[0] == b || t[1] == b || t[2] == b) out.push_back(f);
        }
        return out;
    }

    std::vector<int> neighbors(int v) const {
        std::vector<int> out;
        for (int f : vfaces_[v]) {
            for (int u : faces_[f]) {
                if (u != v) out.push_back(u);
            }
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    bool is_boundary(int v) const {
        for (int u : neighbors(v)) {
            if (shared_faces(v, u).size() == 1) return true;
        }
        return false;
    }

    // Target position, or false when the edge may not collapse at all.
    bool placement(int a, int b, Vec3& p) const {
        const bool ba = is_boundary(a), bb = is_boundary(b);
        if (ba && !bb) {
            p = pos_[a];
        } else if (bb && !ba) {
            p = pos_[b];
        } else {
            p = collapse_cost(pos_[a], pos_[b], quadrics_[a], quadrics_[b], lambda_).position;
        }
        return true;
    }

    double cost_of(int a, int b) const {
        Vec3 p;
        placement(a, b, p);
        return (quadrics_[a] + quadrics_[b]).eval(p) + lambda_ * (pos_[a] - pos_[b]).squaredNorm();
    }

    void push(int a, int b) {
        if (a > b) std::swap(a, b);
        heap_.emplace(cost_of(a, b), a, b, version_[a], version_[b]);
    }

    bool collapse_allowed(int a, int b, const Vec3& p) const {
        const std::vector<int> shared = shared_faces(a, b);
        if (shared.empty() || shared.size() > 2) return false;
        if (alive_faces_ < shared.size() + 4 && shared.size() == 2) return false;  // keep a tetrahedron

        // link condition: common neighbours must be exactly the opposite vertices of shared faces
        const std::vector<int> na = neighbors(a), nb = neighbors(b);
        std::vector<int> common;
        std::set_intersection(na.begin(), na.end(), nb.begin(), nb.end(), std::back_inserter(common));
        if (common.size() != shared.size()) return false;

        // an interior edge joining two boundary vertices would pinch the surface
        if (shared.size() == 2 && is_boundary(a) && is_boundary(b)) return false;

        for (int v : {a, b}) {
            for (int f : vfaces_[v]) {
                if (std::find(shared.begin(), shared.end(), f) != shared.end()) continue;
                const Face& t = faces_[f];
                std::array<Vec3, 3> before{pos_[t[0]], pos_[t[1]], pos_[t[2]]};
                std::array<Vec3, 3> after = before;
                for (int k = 0; k < 3; ++k) {
                    if (t[k] == a || t[k] == b) after[k] = p;
                }
                const Vec3 n0 = (before[1] - before[0]).cross(before[2] - before[0]);
                const Vec3 n1 = (after[1] - after[0]).cross(after[2] - after[0]);
                if (n0.dot(n1) < 0) return false;
                if (n1.norm() <= 1e-10 * n0.norm()) return false;
            }
        }
        return true;
    }

    void collapse(int a, int b, const Vec3& p) {
        const std::vector<int> shared = shared_faces(a, b);
        for (int f : shared) {
            face_alive_[f] = 0;
            --alive_faces_;
            for (int v : faces_[f]) {
                auto& list = vfaces_[v];
                list.erase(std::remove(list.begin(), list.end(), f), list.end());
            }
        }
        for (int f : vfaces_[b]) {
            for (int& v : faces_[f]) {
                if (v == b) v = a;
            }
            vfaces_[a].push_back(f);
        }
        std::sort(vfaces_[a].begin(), vfaces_[a].end());
        vfaces_[b].clear();
        vert_alive_[b] = 0;
        pos_[a] = p;
        quadrics_[a] += quadrics_[b];

        const std::vector<int> ring = neighbors(a);
        ++version_[a];
        for (int u : ring) ++version_[u];
        std::set<std::pair<int, int>> seen;
        for (int x : ring) {
            for (int y : neighbors(x)) {
                if (seen.emplace(std::min(x, y), std::max(x, y)).second) push(x, y);
            }
        }
    }

    TriMesh compact() const {
        TriMesh out;
        std::vector<int> remap(pos_.size(), -1);
        for (std::size_t v = 0; v < pos_.size(); ++v) {
            if (vert_alive_[v] && !vfaces_[v].empty()) {
                remap[v] = static_cast<int>(out.vertices.size());
                out.vertices.push_back(pos_[v]);
            }
        }
        for (std::size_t f = 0; f < faces_.size(); ++f) {
            if (!face_alive_[f]) continue;
            const Face& t = faces_[f];
            out.faces.push_back({remap[t[0]], remap[t[1]], remap[t[2]]});
        }
        return out;
    }

    std::vector<Vec3> pos_;
    std::vector<Face> faces_;
    double lambda_;
    std::vector<char> face_alive_, vert_alive_;
    std::vector<unsigned> version_;
    std::vector<std::vector<int>> vfaces_;
    std::vector<Quadric> quadrics_;
    std::size_t alive_faces_ = 0;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap_;
};

}  // namespace

SimplifyResult simplify(const TriMesh& mesh, std::size_t target_faces, double lambda_edge) {
    validate(mesh);
    if (target_faces == 0) throw ValidationError("target face count must be positive");
    if (mesh.faces.size() <= target_faces) return {mesh, true, 0};
    Collapser c(mesh, lambda_edge);
    return c.run(target_faces);
}

}  // namespace srae
