#include "srae/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <queue>
#include <sstream>
#include <string>

#include "srae/errors.hpp"

namespace srae {

void validate(const TriMesh& mesh) {
    const auto n = static_cast<long>(mesh.vertices.size());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const Face& t = mesh.faces[f];
        for (int k = 0; k < 3; ++k) {
            if (t[k] < 0 || t[k] >= n) {
                throw ValidationError("face " + std::to_string(f) + " references vertex " +
                                      std::to_string(t[k]) + " out of range");
            }
        }
        if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
            throw ValidationError("degenerate face " + std::to_string(f) + " repeats a vertex");
        }
    }
}

namespace {

int parse_obj_index(const std::string& token, long vertex_count, std::size_t line) {
    const std::string head = token.substr(0, token.find('/'));
    long idx = 0;
    try {
        std::size_t used = 0;
        idx = std::stol(head, &used);
        if (used != head.size()) throw std::invalid_argument(head);
    } catch (const std::exception&) {
        throw ParseError("bad face index '" + token + "'", line);
    }
    if (idx < 0) idx = vertex_count + idx + 1;  // relative indices
    if (idx < 1 || idx > vertex_count) {
        throw ParseError("face index " + head + " out of range", line);
    }
    return static_cast<int>(idx - 1);
}

void check_face(const Face& f, std::size_t line) {
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) {
        throw ValidationError("degenerate face repeats a vertex (line " + std::to_string(line) +
                              ")");
    }
}

}  // namespace

TriMesh parse_obj(std::istream& in) {
    TriMesh mesh;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag) || tag[0] == '#') continue;
        if (tag == "v") {
            Vec3 p;
            if (!(ss >> p.x() >> p.y() >> p.z())) throw ParseError("bad vertex record", lineno);
            mesh.vertices.push_back(p);
        } else if (tag == "f") {
            std::vector<std::string> tokens;
            std::string t;
            while (ss >> t) tokens.push_back(t);
            if (tokens.size() != 3) {
                throw ParseError("non-triangular face with " + std::to_string(tokens.size()) +
                                     " vertices",
                                 lineno);
            }
            const auto nv = static_cast<long>(mesh.vertices.size());
            Face f{parse_obj_index(tokens[0], nv, lineno), parse_obj_index(tokens[1], nv, lineno),
                   parse_obj_index(tokens[2], nv, lineno)};
            check_face(f, lineno);
            mesh.faces.push_back(f);
        }
        // vn, vt, g, o, s, usemtl, ... are ignored
    }
    return mesh;
}

TriMesh parse_off(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    // Yields whitespace-separated tokens while tracking line numbers and skipping comments.
    std::istringstream current;
    auto next_token = [&](std::string& tok) -> bool {
        while (!(current >> tok)) {
            if (!std::getline(in, line)) return false;
            ++lineno;
            line = line.substr(0, line.find('#'));
            current.clear();
            current.str(line);
        }
        return true;
    };
    auto next_number = [&](auto& value, const char* what) {
        std::string tok;
        if (!next_token(tok)) throw ParseError(std::string("unexpected end of file reading ") + what, lineno);
        std::istringstream ts(tok);
        if (!(ts >> value)) throw ParseError(std::string("bad ") + what + " '" + tok + "'", lineno);
    };

    std::string header;
    if (!next_token(header) || header != "OFF") throw ParseError("missing OFF header", lineno);
    long nv = 0, nf = 0, ne = 0;
    next_number(nv, "vertex count");
    next_number(nf, "face count");
    next_number(ne, "edge count");
    if (nv < 0 || nf < 0) throw ParseError("negative element count", lineno);

    TriMesh mesh;
    mesh.vertices.resize(static_cast<std::size_t>(nv));
    for (auto& p : mesh.vertices) {
        next_number(p.x(), "coordinate");
        next_number(p.y(), "coordinate");
        next_number(p.z(), "coordinate");
    }
    mesh.faces.reserve(static_cast<std::size_t>(nf));
    for (long f = 0; f < nf; ++f) {
        long count = 0;
        next_number(count, "face size");
        if (count != 3) throw ParseError("non-triangular face with " + std::to_string(count) + " vertices", lineno);
        Face face{};
        for (int& idx : face) {
            long v = 0;
            next_number(v, "face index");
            if (v < 0 || v >= nv) throw ParseError("face index out of range", lineno);
            idx = static_cast<int>(v);
        }
        check_face(face, lineno);
        mesh.faces.push_back(face);
        // optional per-face colour values trail on the same line
        current.str("");
        current.clear();
    }
    return mesh;
}

TriMesh load_mesh(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open mesh file " + path.string());
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".off") return parse_off(in);
    if (ext == ".obj") return parse_obj(in);
    throw ParseError("unsupported mesh extension '" + ext + "'", 0);
}

void write_obj(const TriMesh& mesh, std::ostream& out) {
    char buf[128];
    for (const Vec3& p : mesh.vertices) {
        std::snprintf(buf, sizeof buf, "v %.6f %.6f %.6f\n", p.x(), p.y(), p.z());
        out << buf;
    }
    for (const Face& f : mesh.faces) {
        out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
    }
}

void save_mesh(const TriMesh& mesh, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write mesh file " + path.string());
    write_obj(mesh, out);
    out.flush();
    if (!out) throw IoError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------

Topology::Topology(const TriMesh& mesh) : faces_(mesh.faces) { build(mesh.vertices.size()); }

Topology::Topology(std::size_t vertex_count, std::span<const Face> faces)
    : faces_(faces.begin(), faces.end()) {
    build(vertex_count);
}

void Topology::build(std::size_t vertex_count) {
    vertex_faces_.assign(vertex_count, {});
    for (std::size_t f = 0; f < faces_.size(); ++f) {
        const Face& t = faces_[f];
        for (int k = 0; k < 3; ++k) {
            vertex_faces_[t[k]].push_back(static_cast<int>(f));
            auto& list = edge_faces_[edge_key(t[k], t[(k + 1) % 3])];
            list.push_back(static_cast<int>(f));
        }
    }
    edges_.reserve(edge_faces_.size());
    for (const auto& [key, list] : edge_faces_) {
        edges_.push_back({static_cast<int>(key >> 32), static_cast<int>(key & 0xffffffffu)});
    }
    std::sort(edges_.begin(), edges_.end());
}

const std::vector<int>& Topology::edge_faces(int a, int b) const {
    static const std::vector<int> empty;
    auto it = edge_faces_.find(edge_key(a, b));
    return it == edge_faces_.end() ? empty : it->second;
}

bool Topology::is_boundary_vertex(int v) const {
    for (int f : vertex_faces_[v]) {
        const Face& t = faces_[f];
        for (int k = 0; k < 3; ++k) {
            if (t[k] == v) {
                if (edge_faces(v, t[(k + 1) % 3]).size() == 1) return true;
                if (edge_faces(v, t[(k + 2) % 3]).size() == 1) return true;
            }
        }
    }
    return false;
}

bool Topology::is_manifold_vertex(int v) const {
    // Manifold when the incident faces form a single fan.
    std::vector<int> ring = one_ring(v);
    std::size_t expected = vertex_faces_[v].size() + (is_boundary_vertex(v) ? 1 : 0);
    if (ring.size() != expected) return false;
    for (int u : ring) {
        if (edge_faces(v, u).size() > 2) return false;
    }
    return true;
}

std::vector<int> Topology::one_ring(int v) const {
    // Each incident face (v, a, b) contributes the directed step a -> b.
    std::unordered_map<int, int> next;
    std::unordered_map<int, int> incoming;
    std::vector<int> order_hint;
    bool well_formed = true;
    for (int f : vertex_faces_[v]) {
        const Face& t = faces_[f];
        int k = t[0] == v ? 0 : (t[1] == v ? 1 : 2);
        int a = t[(k + 1) % 3], b = t[(k + 2) % 3];
        if (!next.emplace(a, b).second) well_formed = false;
        ++incoming[b];
        order_hint.push_back(a);
    }
    auto fallback = [&] {
        std::vector<int> out;
        for (int f : vertex_faces_[v]) {
            for (int u : faces_[f]) {
                if (u != v) out.push_back(u);
            }
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    };
    if (!well_formed || next.empty()) return next.empty() ? std::vector<int>{} : fallback();

    int start = order_hint.front();
    int starts = 0;
    for (int a : order_hint) {
        if (!incoming.count(a)) {
            if (starts++ == 0) start = a;
        }
    }
    if (starts > 1) return fallback();  // several boundary gaps: not a single fan

    std::vector<int> ring{start};
    int cur = start;
    while (true) {
        auto it = next.find(cur);
        if (it == next.end()) break;
        cur = it->second;
        if (cur == start) break;
        ring.push_back(cur);
        if (ring.size() > next.size() + 1) return fallback();
    }
    const std::size_t expected = next.size() + (starts == 1 ? 1 : 0);
    if (ring.size() != expected) return fallback();
    return ring;
}

std::vector<int> one_ring(const TriMesh& mesh, int v) { return Topology(mesh).one_ring(v); }

int vertex_degree(const TriMesh& mesh, int v) { return static_cast<int>(one_ring(mesh, v).size()); }

std::vector<int> r_ring(const Topology& topo, int v, int r) {
    std::vector<int> dist(topo.vertex_count(), -1);
    std::vector<int> out{v};
    std::queue<int> q;
    dist[v] = 0;
    q.push(v);
    while (!q.empty()) {
        int u = q.front();
        q.pop();
        if (dist[u] == r) continue;
        for (int f : topo.vertex_faces(u)) {
            for (int w : topo.faces()[f]) {
                if (dist[w] < 0) {
                    dist[w] = dist[u] + 1;
                    out.push_back(w);
                    q.push(w);
                }
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<int> r_ring(const TriMesh& mesh, int v, int r) { return r_ring(Topology(mesh), v, r); }

TopologyReport topology_report(const TriMesh& mesh) {
    Topology topo(mesh);
    TopologyReport rep;
    for (const auto& e : topo.edges()) {
        const auto n = topo.edge_faces(e[0], e[1]).size();
        if (n == 1) ++rep.boundary_edges;
        if (n > 2) ++rep.non_manifold_edges;
    }
    rep.euler_characteristic = static_cast<long>(mesh.vertices.size()) -
                               static_cast<long>(topo.edges().size()) +
                               static_cast<long>(mesh.faces.size());
    return rep;
}

UnitCubeTransform unit_cube_transform(std::span<const Vec3> points) {
    if (points.empty()) throw ValidationError("cannot normalize an empty point set");
    Vec3 lo = points[0], hi = points[0];
    for (const Vec3& p : points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const double extent = (hi - lo).maxCoeff();
    if (!(extent > 0.0)) throw ValidationError("zero-extent mesh: all vertices coincide");
    UnitCubeTransform t;
    t.scale = 2.0 / extent;
    t.translation = -t.scale * 0.5 * (lo + hi);
    return t;
}

std::pair<TriMesh, UnitCubeTransform> normalize_unit_cube(const TriMesh& mesh) {
    UnitCubeTransform t = unit_cube_transform(mesh.vertices);
    TriMesh out = mesh;
    for (Vec3& p : out.vertices) p = t.apply(p);
    return {std::move(out), t};
}

FaceGeometry face_normals_areas(const TriMesh& mesh) {
    FaceGeometry g;
    g.normals.reserve(mesh.faces.size());
    g.areas.reserve(mesh.faces.size());
    for (const Face& f : mesh.faces) {
        const Vec3 c = (mesh.vertices[f[1]] - mesh.vertices[f[0]])
                           .cross(mesh.vertices[f[2]] - mesh.vertices[f[0]]);
        const double len = c.norm();
        g.areas.push_back(0.5 * len);
        g.normals.push_back(len > 0 ? Vec3(c / len) : Vec3::Zero());
    }
    return g;
}

std::vector<SurfaceSample> sample_surface_detailed(std::span<const Vec3> vertices,
                                                   std::span<const Face> faces, std::size_t n,
                                                   Rng& rng) {
    std::vector<double> cdf(faces.size());
    double total = 0.0;
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const Face& t = faces[f];
        total += 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
        cdf[f] = total;
    }
    if (!(total > 0.0)) throw ValidationError("cannot sample a zero-area mesh");

    std::vector<SurfaceSample> out;
    out.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        const double u = uniform01(rng) * total;
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        int f = static_cast<int>(std::min<std::ptrdiff_t>(it - cdf.begin(), faces.size() - 1));
        const double r1 = std::sqrt(uniform01(rng));
        const double r2 = uniform01(rng);
        std::array<double, 3> b{1.0 - r1, r1 * (1.0 - r2), r1 * r2};
        const Face& t = faces[f];
        Vec3 p = b[0] * vertices[t[0]] + b[1] * vertices[t[1]] + b[2] * vertices[t[2]];
        out.push_back({f, b, p});
    }
    return out;
}

std::vector<Vec3> sample_surface(const TriMesh& mesh, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw ValidationError("sample count must be at least 1");
    Rng rng(seed);
    auto detailed = sample_surface_detailed(mesh.vertices, mesh.faces, n, rng);
    std::vector<Vec3> pts;
    pts.reserve(n);
    for (const auto& s : detailed) pts.push_back(s.point);
    return pts;
}

}  // namespace srae
