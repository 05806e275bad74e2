#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "srae/random.hpp"

namespace srae {

using Vec3 = Eigen::Vector3d;
using Face = std::array<int, 3>;

/// Triangular surface mesh. Faces are counterclockwise vertex-index triples.
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
};

/// Throws ValidationError on out-of-range indices or faces that repeat a vertex.
void validate(const TriMesh& mesh);

/// Reads OBJ (`v`/`f` records only) or OFF, chosen by file extension.
TriMesh load_mesh(const std::filesystem::path& path);
/// Writes OBJ with 6-decimal fixed-point coordinates.
void save_mesh(const TriMesh& mesh, const std::filesystem::path& path);

TriMesh parse_obj(std::istream& in);
TriMesh parse_off(std::istream& in);
void write_obj(const TriMesh& mesh, std::ostream& out);

inline std::uint64_t edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
}

/// Adjacency tables derived once from a mesh's faces.
class Topology {
public:
    explicit Topology(const TriMesh& mesh);
    Topology(std::size_t vertex_count, std::span<const Face> faces);

    std::size_t vertex_count() const { return vertex_faces_.size(); }
    std::span<const Face> faces() const { return faces_; }
    const std::vector<int>& vertex_faces(int v) const { return vertex_faces_[v]; }
    /// Faces incident to the undirected edge (a,b); empty when the edge does not exist.
    const std::vector<int>& edge_faces(int a, int b) const;
    /// Undirected edges as (min,max) pairs, sorted.
    const std::vector<std::array<int, 2>>& edges() const { return edges_; }

    /// Neighbors in fan order. Boundary vertices start at the boundary edge and walk inward.
    std::vector<int> one_ring(int v) const;
    bool is_boundary_vertex(int v) const;
    bool is_manifold_vertex(int v) const;

private:
    void build(std::size_t vertex_count);

    std::vector<Face> faces_;
    std::vector<std::vector<int>> vertex_faces_;
    std::unordered_map<std::uint64_t, std::vector<int>> edge_faces_;
    std::vector<std::array<int, 2>> edges_;
};

std::vector<int> one_ring(const TriMesh& mesh, int v);
int vertex_degree(const TriMesh& mesh, int v);

/// Vertices within `r` edges of `v`, including `v` itself (distance 0). Sorted.
std::vector<int> r_ring(const TriMesh& mesh, int v, int r);
std::vector<int> r_ring(const Topology& topo, int v, int r);

struct TopologyReport {
    std::size_t boundary_edges = 0;
    std::size_t non_manifold_edges = 0;
    long euler_characteristic = 0;
};

TopologyReport topology_report(const TriMesh& mesh);

/// Uniform scale then translation: normalized = scale * p + translation.
struct UnitCubeTransform {
    double scale = 1.0;
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return scale * p + translation; }
    Vec3 invert(const Vec3& p) const { return (p - translation) / scale; }
};

/// Centers the bounding box at the origin and maps the longest axis onto [-1,1].
std::pair<TriMesh, UnitCubeTransform> normalize_unit_cube(const TriMesh& mesh);
UnitCubeTransform unit_cube_transform(std::span<const Vec3> points);

struct FaceGeometry {
    std::vector<Vec3> normals;
    std::vector<double> areas;
};

FaceGeometry face_normals_areas(const TriMesh& mesh);

/// A point sampled on a face, with its barycentric weights.
struct SurfaceSample {
    int face;
    std::array<double, 3> bary;
    Vec3 point;
};

/// Area-weighted uniform surface samples.
std::vector<SurfaceSample> sample_surface_detailed(std::span<const Vec3> vertices,
                                                   std::span<const Face> faces, std::size_t n,
                                                   Rng& rng);
std::vector<Vec3> sample_surface(const TriMesh& mesh, std::size_t n, std::uint64_t seed);

}  // namespace srae
