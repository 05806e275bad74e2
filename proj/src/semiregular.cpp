#include <fstream>

#include <json.hpp>

#include "srae/errors.hpp"
#include "srae/remesh.hpp"

namespace srae {

using nlohmann::json;

std::vector<Face> SemiRegularMesh::fine_faces() const {
    const int n = resolution();
    std::vector<Face> out;
    out.reserve(base.faces.size() * static_cast<std::size_t>(n) * n);
    for (std::size_t f = 0; f < base.faces.size(); ++f) {
        const auto& g = patch_grids[f];
        auto id = [&](int i, int j) { return g[grid_index(i, j, n)]; };
        for (int i = 0; i < n; ++i) {
            for (int j = 0; i + j < n; ++j) {
                out.push_back({id(i, j), id(i + 1, j), id(i, j + 1)});
                if (i + j + 2 <= n) out.push_back({id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
            }
        }
    }
    return out;
}

TriMesh SemiRegularMesh::fine_mesh() const { return TriMesh{fine_positions, fine_faces()}; }

SemiRegularMesh SemiRegularMesh::with_positions(std::vector<Vec3> positions) const {
    if (positions.size() != fine_positions.size()) {
        throw ValidationError("position count does not match the semi-regular mesh");
    }
    SemiRegularMesh out = *this;
    out.fine_positions = std::move(positions);
    for (std::size_t v = 0; v < out.base.vertices.size(); ++v) out.base.vertices[v] = out.fine_positions[v];
    return out;
}

SemiRegularMesh subdivide(const TriMesh& base, int level) {
    validate(base);
    if (level < 1) throw ValidationError("subdivision level must be >= 1");
    if (level > 10) throw ValidationError("subdivision level too large");
    const int n = 1 << level;
    const Topology topo(base);

    SemiRegularMesh sr;
    sr.base = base;
    sr.level = level;
    sr.fine_positions = base.vertices;

    std::unordered_map<std::uint64_t, int> edge_start;
    for (const auto& e : topo.edges()) {
        edge_start[edge_key(e[0], e[1])] = static_cast<int>(sr.fine_positions.size());
        for (int t = 1; t < n; ++t) {
            const double s = static_cast<double>(t) / n;
            sr.fine_positions.push_back((1.0 - s) * base.vertices[e[0]] + s * base.vertices[e[1]]);
        }
    }

    sr.patch_grids.resize(base.faces.size());
    for (std::size_t f = 0; f < base.faces.size(); ++f) {
        const Face& t = base.faces[f];
        auto& grid = sr.patch_grids[f];
        grid.assign(SemiRegularMesh::grid_size(n), -1);
        for (int i = 0; i <= n; ++i) {
            for (int j = 0; i + j <= n; ++j) {
                const std::array<int, 3> w{n - i - j, i, j};
                const int zeros = (w[0] == 0) + (w[1] == 0) + (w[2] == 0);
                int id;
                if (zeros == 2) {
                    id = t[w[0] ? 0 : (w[1] ? 1 : 2)];
                } else if (zeros == 1) {
                    const int z = w[0] == 0 ? 0 : (w[1] == 0 ? 1 : 2);
                    const int p = t[(z + 1) % 3], q = t[(z + 2) % 3];
                    const int wq = w[(z + 2) % 3];
                    // parameter measured from the lower vertex id along the shared edge
                    const int along = p < q ? wq : n - wq;
                    id = edge_start.at(edge_key(p, q)) + along - 1;
                } else {
                    id = static_cast<int>(sr.fine_positions.size());
                    sr.fine_positions.push_back(
                        (w[0] * base.vertices[t[0]] + w[1] * base.vertices[t[1]] + w[2] * base.vertices[t[2]]) / n);
                }
                grid[SemiRegularMesh::grid_index(i, j, n)] = id;
            }
        }
    }
    return sr;
}

namespace {

json vec_array(std::span<const Vec3> pts) {
    json a = json::array();
    for (const Vec3& p : pts) a.push_back({p.x(), p.y(), p.z()});
    return a;
}

std::vector<Vec3> read_vecs(const json& a, const char* what) {
    if (!a.is_array()) throw ParseError(std::string(what) + " must be an array", 0);
    std::vector<Vec3> out;
    out.reserve(a.size());
    for (const auto& p : a) {
        if (!p.is_array() || p.size() != 3) throw ParseError(std::string(what) + " entries must be 3-vectors", 0);
        out.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
    }
    return out;
}

}  // namespace

void save_srm(const SemiRegularMesh& sr, const std::filesystem::path& path) {
    json doc;
    doc["version"] = 1;
    doc["level"] = sr.level;
    doc["base_vertices"] = vec_array(sr.base.vertices);
    json faces = json::array();
    for (const Face& f : sr.base.faces) faces.push_back({f[0], f[1], f[2]});
    doc["base_faces"] = faces;
    doc["fine_positions"] = vec_array(sr.fine_positions);
    doc["patch_grids"] = sr.patch_grids;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << doc.dump() << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

SemiRegularMesh load_srm(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what(), 0);
    }
    try {
        if (doc.at("version").get<int>() != 1) throw ParseError("unsupported .srm version", 0);
        SemiRegularMesh sr;
        sr.level = doc.at("level").get<int>();
        if (sr.level < 1 || sr.level > 10) throw ValidationError("invalid subdivision level");
        sr.base.vertices = read_vecs(doc.at("base_vertices"), "base_vertices");
        for (const auto& f : doc.at("base_faces")) {
            sr.base.faces.push_back({f.at(0).get<int>(), f.at(1).get<int>(), f.at(2).get<int>()});
        }
        validate(sr.base);
        sr.fine_positions = read_vecs(doc.at("fine_positions"), "fine_positions");
        sr.patch_grids = doc.at("patch_grids").get<std::vector<std::vector<int>>>();

        const int n = sr.resolution();
        if (sr.patch_grids.size() != sr.base.faces.size()) {
            throw ValidationError("patch_grids count does not match base faces");
        }
        for (std::size_t f = 0; f < sr.patch_grids.size(); ++f) {
            const auto& g = sr.patch_grids[f];
            if (static_cast<int>(g.size()) != SemiRegularMesh::grid_size(n)) {
                throw ValidationError("patch grid " + std::to_string(f) + " has wrong size");
            }
            for (int id : g) {
                if (id < 0 || id >= static_cast<int>(sr.fine_positions.size())) {
                    throw ValidationError("patch grid " + std::to_string(f) + " references missing vertex");
                }
            }
            const Face& t = sr.base.faces[f];
            if (sr.vertex_at(static_cast<int>(f), 0, 0) != t[0] ||
                sr.vertex_at(static_cast<int>(f), n, 0) != t[1] ||
                sr.vertex_at(static_cast<int>(f), 0, n) != t[2]) {
                throw ValidationError("patch grid " + std::to_string(f) + " corners disagree with base face");
            }
        }
        return sr;
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what(), 0);
    }
}

}  // namespace srae
