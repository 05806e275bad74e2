#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "srae/errors.hpp"
#include "srae/mesh.hpp"
#include "srae/remesh.hpp"
#include "srae/shapes.hpp"

using namespace srae;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
    const fs::path d = fs::temp_directory_path() / "srae_test_mesh";
    fs::create_directories(d);
    return d;
}

TriMesh from_obj(const std::string& text) {
    std::istringstream in(text);
    return parse_obj(in);
}

}  // namespace

TEST_CASE("obj tetrahedron parses") {
    const TriMesh m = from_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 3 2\nf 1 2 4\nf 2 3 4\nf 1 4 3\n");
    CHECK(m.vertices.size() == 4);
    CHECK(m.faces.size() == 4);
}

TEST_CASE("obj ignores normals, texture coordinates and slashes") {
    const TriMesh m = from_obj("# c\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nvt 0 0\nf 1/1/1 2/2/1 3//1\n");
    REQUIRE(m.faces.size() == 1);
    CHECK(m.faces[0] == Face{0, 1, 2});
}

TEST_CASE("obj quad face is rejected") {
    CHECK_THROWS_WITH_AS(from_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n"),
                         doctest::Contains("non-triangular face"), ParseError);
}

TEST_CASE("obj out-of-range index is rejected") {
    CHECK_THROWS_AS(load_mesh(scratch_dir() / "missing.obj"), IoError);
    const fs::path p = scratch_dir() / "bad.obj";
    std::ofstream(p) << "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 7\n";
    CHECK_THROWS_AS(load_mesh(p), Error);
}

TEST_CASE("off icosahedron parses") {
    const TriMesh ico = shapes::icosahedron();
    std::ostringstream off;
    off << "OFF\n" << ico.vertices.size() << " " << ico.faces.size() << " 0\n";
    for (const auto& v : ico.vertices) off << v.x() << " " << v.y() << " " << v.z() << "\n";
    for (const auto& f : ico.faces) off << "3 " << f[0] << " " << f[1] << " " << f[2] << "\n";
    std::istringstream in(off.str());
    const TriMesh m = parse_off(in);
    CHECK(m.vertices.size() == 12);
    CHECK(m.faces.size() == 20);
}

TEST_CASE("save and load round trip") {
    const TriMesh tet = shapes::tetrahedron();
    const fs::path p = scratch_dir() / "tet.obj";
    save_mesh(tet, p);
    const TriMesh a = load_mesh(p);
    CHECK(a.faces == tet.faces);
    save_mesh(a, p);
    const TriMesh b = load_mesh(p);
    CHECK(b.faces == a.faces);
    for (std::size_t k = 0; k < a.vertices.size(); ++k) CHECK(a.vertices[k] == b.vertices[k]);

    const fs::path q = scratch_dir() / "tet.off";
    std::ofstream off(q);
    off << "OFF\n4 4 0\n";
    for (const auto& v : tet.vertices) off << v.x() << " " << v.y() << " " << v.z() << "\n";
    for (const auto& f : tet.faces) off << "3 " << f[0] << " " << f[1] << " " << f[2] << "\n";
    off.close();
    CHECK(load_mesh(q).faces == tet.faces);
}

TEST_CASE("positions are written with six decimals") {
    TriMesh m = shapes::single_triangle();
    m.vertices[0] = Vec3(0.1234567, 0, 0);
    std::ostringstream out;
    write_obj(m, out);
    CHECK(out.str().find("0.123457") != std::string::npos);
    std::istringstream in(out.str());
    CHECK(parse_obj(in).vertices[0].x() == doctest::Approx(0.123457).epsilon(1e-12));
}

TEST_CASE("writing to an unwritable path fails with an io error") {
    CHECK_THROWS_AS(save_mesh(shapes::tetrahedron(), "/nonexistent-dir/x/y.obj"), IoError);
}

TEST_CASE("validate rejects degenerate and out-of-range faces") {
    TriMesh m = shapes::single_triangle();
    m.faces[0] = {0, 0, 1};
    CHECK_THROWS_AS(validate(m), ValidationError);
    m.faces[0] = {0, 1, 3};
    CHECK_THROWS_AS(validate(m), ValidationError);
}

TEST_CASE("vertex degrees") {
    const TriMesh ico = shapes::icosahedron();
    for (int v = 0; v < 12; ++v) CHECK(vertex_degree(ico, v) == 5);

    const TriMesh tri = shapes::single_triangle();
    for (int v = 0; v < 3; ++v) CHECK(vertex_degree(tri, v) == 2);

    const SemiRegularMesh sr = subdivide(tri, 3);
    const TriMesh fine = sr.fine_mesh();
    const int n = sr.resolution();
    for (int i = 1; i < n; ++i) {
        for (int j = 1; i + j < n; ++j) CHECK(vertex_degree(fine, sr.vertex_at(0, i, j)) == 6);
    }
}

TEST_CASE("r_ring sizes on a regular lattice") {
    const SemiRegularMesh sr = subdivide(shapes::single_triangle(), 3);
    const TriMesh fine = sr.fine_mesh();
    const int v = sr.vertex_at(0, 3, 3);
    CHECK(r_ring(fine, v, 0) == std::vector<int>{v});
    CHECK(r_ring(fine, v, 1).size() == 7);
    CHECK(r_ring(fine, v, 2).size() == 19);
}

TEST_CASE("one_ring fan order") {
    const TriMesh ico = shapes::icosahedron();
    const Topology topo(ico);
    for (int v = 0; v < 12; ++v) {
        const auto ring = topo.one_ring(v);
        REQUIRE(ring.size() == 5);
        // consecutive neighbours share a face with v
        for (std::size_t k = 0; k < ring.size(); ++k) {
            const int a = ring[k], b = ring[(k + 1) % ring.size()];
            CHECK(topo.edge_faces(a, b).size() == 2);
            CHECK(topo.edge_faces(v, a).size() == 2);
        }
    }

    TriMesh flipped = ico;
    for (auto& f : flipped.faces) std::swap(f[1], f[2]);
    const Topology ftopo(flipped);
    for (int v = 0; v < 12; ++v) {
        auto ring = topo.one_ring(v);
        auto rev = ftopo.one_ring(v);
        std::reverse(rev.begin(), rev.end());
        // same cyclic sequence up to the starting element
        const auto it = std::find(rev.begin(), rev.end(), ring[0]);
        REQUIRE(it != rev.end());
        std::rotate(rev.begin(), it, rev.end());
        CHECK(rev == ring);
    }
}

TEST_CASE("boundary fan starts at the boundary edge") {
    const SemiRegularMesh sr = subdivide(shapes::single_triangle(), 2);
    const TriMesh fine = sr.fine_mesh();
    const Topology topo(fine);
    const int v = sr.vertex_at(0, 2, 0);
    const auto ring = topo.one_ring(v);
    REQUIRE(ring.size() == 4);
    CHECK(topo.edge_faces(v, ring.front()).size() == 1);
    CHECK(topo.edge_faces(v, ring.back()).size() == 1);
}

TEST_CASE("topology report") {
    const auto ico = topology_report(shapes::icosahedron());
    CHECK(ico.boundary_edges == 0);
    CHECK(ico.non_manifold_edges == 0);
    CHECK(ico.euler_characteristic == 2);

    const auto tri = topology_report(shapes::single_triangle());
    CHECK(tri.boundary_edges == 3);
    CHECK(tri.non_manifold_edges == 0);
    CHECK(tri.euler_characteristic == 1);

    TriMesh fin;
    fin.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}};
    fin.faces = {{0, 1, 2}, {1, 0, 3}, {0, 1, 4}};
    CHECK(topology_report(fin).non_manifold_edges == 1);
}

TEST_CASE("unit cube normalization") {
    TriMesh box;
    box.vertices = {{0, 0, 0}, {2, 0, 0}, {0, 1, 0}, {0, 0, 1}, {2, 1, 1}};
    box.faces = {{0, 1, 2}, {0, 1, 3}, {1, 4, 2}};
    const auto [m, tf] = normalize_unit_cube(box);
    Eigen::Vector3d lo = m.vertices[0], hi = m.vertices[0];
    for (const auto& v : m.vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    CHECK(lo.x() == doctest::Approx(-1.0));
    CHECK(hi.x() == doctest::Approx(1.0));
    CHECK(lo.y() == doctest::Approx(-0.5));
    CHECK(hi.y() == doctest::Approx(0.5));
    CHECK(lo.z() == doctest::Approx(-0.5));
    CHECK(hi.z() == doctest::Approx(0.5));
    for (std::size_t k = 0; k < box.vertices.size(); ++k) {
        CHECK((tf.invert(m.vertices[k]) - box.vertices[k]).norm() < 1e-12);
    }

    const auto [again, tf2] = normalize_unit_cube(m);
    CHECK(tf2.scale == doctest::Approx(1.0));
    CHECK(tf2.translation.norm() < 1e-12);

    TriMesh scaled = box;
    for (auto& v : scaled.vertices) v *= 5.0;
    const auto [ms, tfs] = normalize_unit_cube(scaled);
    for (std::size_t k = 0; k < m.vertices.size(); ++k) CHECK((ms.vertices[k] - m.vertices[k]).norm() < 1e-12);
}

TEST_CASE("face normals and areas") {
    TriMesh rt;
    rt.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    rt.faces = {{0, 1, 2}};
    const FaceGeometry g = face_normals_areas(rt);
    CHECK(g.areas[0] == doctest::Approx(0.5));
    CHECK(std::abs(g.normals[0].z()) == doctest::Approx(1.0));
}

TEST_CASE("surface sampling is area weighted") {
    TriMesh two;
    two.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 2, 0}, {10, 0, 0}, {13, 0, 0}, {10, 2, 0}};
    two.faces = {{0, 1, 2}, {3, 4, 5}};
    Rng rng(3);
    const auto samples = sample_surface_detailed(two.vertices, two.faces, 100000, rng);
    std::size_t second = 0;
    for (const auto& s : samples) second += s.face == 1;
    CHECK(std::abs(static_cast<double>(second) / 1e5 - 0.75) < 0.01);
}

TEST_CASE("surface samples lie inside their faces and are deterministic") {
    const TriMesh sphere = shapes::icosphere(2);
    Rng rng(9);
    const auto samples = sample_surface_detailed(sphere.vertices, sphere.faces, 5000, rng);
    const FaceGeometry g = face_normals_areas(sphere);
    for (const auto& s : samples) {
        const Face& f = sphere.faces[static_cast<std::size_t>(s.face)];
        double sum = 0.0;
        for (double b : s.bary) {
            CHECK(b >= 0.0);
            CHECK(b <= 1.0);
            sum += b;
        }
        CHECK(sum == doctest::Approx(1.0));
        const double plane = g.normals[static_cast<std::size_t>(s.face)].dot(s.point - sphere.vertices[f[0]]);
        CHECK(std::abs(plane) < 1e-9);
    }
    CHECK(sample_surface(sphere, 1000, 4) == sample_surface(sphere, 1000, 4));
    CHECK(sample_surface(sphere, 1000, 4) != sample_surface(sphere, 1000, 5));
}

TEST_CASE("subdivision keeps the euler characteristic of closed meshes") {
    for (const TriMesh& base : {shapes::tetrahedron(), shapes::octahedron(), shapes::icosahedron()}) {
        for (int level = 1; level <= 3; ++level) {
            CHECK(topology_report(subdivide(base, level).fine_mesh()).euler_characteristic == 2);
        }
    }
}
