#include "srae/shapes.hpp"

#include <cmath>
#include <numbers>
#include <unordered_map>

namespace srae::shapes {

namespace {

// Flips faces of a star-shaped closed mesh so normals point away from the origin.
void orient_outward(TriMesh& mesh) {
    for (Face& f : mesh.faces) {
        const Vec3& a = mesh.vertices[f[0]];
        const Vec3 n = (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a);
        const Vec3 c = (a + mesh.vertices[f[1]] + mesh.vertices[f[2]]) / 3.0;
        if (n.dot(c) < 0) std::swap(f[1], f[2]);
    }
}

}  // namespace

TriMesh tetrahedron() {
    TriMesh m;
    m.vertices = {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
    m.faces = {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}};
    orient_outward(m);
    return m;
}

TriMesh octahedron() {
    TriMesh m;
    m.vertices = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    m.faces = {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4},
               {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
    orient_outward(m);
    return m;
}

TriMesh icosahedron() {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    TriMesh m;
    m.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                  {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (Vec3& p : m.vertices) p.normalize();
    m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
               {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
               {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
               {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    orient_outward(m);
    return m;
}

TriMesh single_triangle() {
    TriMesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {0.5, std::sqrt(3.0) / 2.0, 0}};
    m.faces = {{0, 1, 2}};
    return m;
}

TriMesh midpoint_subdivide(const TriMesh& mesh, int times) {
    TriMesh cur = mesh;
    for (int it = 0; it < times; ++it) {
        TriMesh next;
        next.vertices = cur.vertices;
        std::unordered_map<std::uint64_t, int> mid;
        auto midpoint = [&](int a, int b) {
            auto [pos, inserted] = mid.emplace(edge_key(a, b), static_cast<int>(next.vertices.size()));
            if (inserted) next.vertices.push_back(0.5 * (cur.vertices[a] + cur.vertices[b]));
            return pos->second;
        };
        next.faces.reserve(cur.faces.size() * 4);
        for (const Face& f : cur.faces) {
            const int ab = midpoint(f[0], f[1]), bc = midpoint(f[1], f[2]), ca = midpoint(f[2], f[0]);
            next.faces.push_back({f[0], ab, ca});
            next.faces.push_back({ab, f[1], bc});
            next.faces.push_back({ca, bc, f[2]});
            next.faces.push_back({ab, bc, ca});
        }
        cur = std::move(next);
    }
    return cur;
}

TriMesh icosphere(int level) {
    TriMesh m = midpoint_subdivide(icosahedron(), level);
    for (Vec3& p : m.vertices) p.normalize();
    return m;
}

TriMesh hex_plane(int radius) {
    const Vec3 e1(1, 0, 0), e2(0.5, std::sqrt(3.0) / 2.0, 0);
    auto inside = [radius](int a, int b) {
        return std::max({std::abs(a), std::abs(b), std::abs(a + b)}) <= radius;
    };
    TriMesh m;
    std::unordered_map<std::uint64_t, int> id;
    auto key = [](int a, int b) { return edge_key(a + 1000, b + 3000); };
    for (int a = -radius; a <= radius; ++a) {
        for (int b = -radius; b <= radius; ++b) {
            if (!inside(a, b)) continue;
            id[key(a, b)] = static_cast<int>(m.vertices.size());
            m.vertices.push_back(a * e1 + b * e2);
        }
    }
    for (int a = -radius; a <= radius; ++a) {
        for (int b = -radius; b <= radius; ++b) {
            if (inside(a, b) && inside(a + 1, b) && inside(a, b + 1)) {
                m.faces.push_back({id[key(a, b)], id[key(a + 1, b)], id[key(a, b + 1)]});
            }
            if (inside(a + 1, b) && inside(a + 1, b + 1) && inside(a, b + 1)) {
                m.faces.push_back({id[key(a + 1, b)], id[key(a + 1, b + 1)], id[key(a, b + 1)]});
            }
        }
    }
    return m;
}

TriMesh tube(const TubeParams& p) {
    TriMesh m;
    Rng rng(p.seed);
    const double dtheta = 2.0 * std::numbers::pi / p.segments;
    const double dz = p.length / p.rings;
    for (int r = 0; r <= p.rings; ++r) {
        for (int s = 0; s < p.segments; ++s) {
            double theta = s * dtheta;
            double z = r * dz;
            if (p.jitter > 0 && r > 0 && r < p.rings) {
                theta += uniform(rng, -p.jitter, p.jitter) * dtheta;
                z += uniform(rng, -p.jitter, p.jitter) * dz;
            }
            m.vertices.emplace_back(p.radius * std::cos(theta), p.radius * std::sin(theta), z);
        }
    }
    auto id = [&](int r, int s) { return r * p.segments + (s % p.segments); };
    for (int r = 0; r < p.rings; ++r) {
        for (int s = 0; s < p.segments; ++s) {
            const int a = id(r, s), b = id(r, s + 1), c = id(r + 1, s), d = id(r + 1, s + 1);
            if ((r + s) % 2 == 0) {
                m.faces.push_back({a, b, c});
                m.faces.push_back({b, d, c});
            } else {
                m.faces.push_back({a, b, d});
                m.faces.push_back({a, d, c});
            }
        }
    }
    return m;
}

TriMesh bend(const TriMesh& mesh, double total_angle, double length) {
    if (std::abs(total_angle) < 1e-12) return mesh;
    const double kappa = total_angle / length;
    const double rc = 1.0 / kappa;
    TriMesh out = mesh;
    for (Vec3& v : out.vertices) {
        const double x = v.x(), z = v.z();
        const double phi = kappa * z;
        v.x() = rc - (rc - x) * std::cos(phi);
        v.z() = (rc - x) * std::sin(phi);
    }
    return out;
}

std::vector<TriMesh> bending_tube_sequence(const TubeParams& params, int frames, int period,
                                           double max_angle) {
    const TriMesh rest = tube(params);
    std::vector<TriMesh> seq;
    seq.reserve(frames);
    for (int t = 0; t < frames; ++t) {
        const double angle = max_angle * std::sin(2.0 * std::numbers::pi * t / period);
        seq.push_back(bend(rest, angle, params.length));
    }
    return seq;
}

TriMesh torus_segment(const TorusSegmentParams& p) {
    TriMesh m;
    for (int i = 0; i <= p.sweep_steps; ++i) {
        const double u = p.sweep * i / p.sweep_steps;
        for (int j = 0; j < p.tube_steps; ++j) {
            const double v = 2.0 * std::numbers::pi * j / p.tube_steps;
            const double ring = p.major_radius + p.minor_radius * std::cos(v);
            m.vertices.emplace_back(ring * std::cos(u), ring * std::sin(u), p.minor_radius * std::sin(v));
        }
    }
    auto id = [&](int i, int j) { return i * p.tube_steps + (j % p.tube_steps); };
    for (int i = 0; i < p.sweep_steps; ++i) {
        for (int j = 0; j < p.tube_steps; ++j) {
            const int a = id(i, j), b = id(i, j + 1), c = id(i + 1, j), d = id(i + 1, j + 1);
            if ((i + j) % 2 == 0) {
                m.faces.push_back({a, c, b});
                m.faces.push_back({b, c, d});
            } else {
                m.faces.push_back({a, d, b});
                m.faces.push_back({a, c, d});
            }
        }
    }
    // outward: normal should point away from the tube's centre circle
    double sign = 0.0;
    for (const Face& f : m.faces) {
        const Vec3& a = m.vertices[f[0]];
        const Vec3 n = (m.vertices[f[1]] - a).cross(m.vertices[f[2]] - a);
        const Vec3 c = (a + m.vertices[f[1]] + m.vertices[f[2]]) / 3.0;
        const double u = std::atan2(c.y(), c.x());
        const Vec3 centre(p.major_radius * std::cos(u), p.major_radius * std::sin(u), 0.0);
        sign += n.dot(c - centre);
    }
    if (sign < 0) {
        for (Face& f : m.faces) std::swap(f[1], f[2]);
    }
    return m;
}

std::vector<TriMesh> torus_segment_sequence(const TorusSegmentParams& params, int frames,
                                            int period) {
    std::vector<TriMesh> seq;
    seq.reserve(frames);
    for (int t = 0; t < frames; ++t) {
        const double phase = std::sin(2.0 * std::numbers::pi * t / period);
        TorusSegmentParams q = params;
        q.sweep = params.sweep * (1.0 + 0.25 * phase);
        q.minor_radius = params.minor_radius * (1.0 + 0.15 * phase);
        seq.push_back(torus_segment(q));
    }
    return seq;
}

}  // namespace srae::shapes
