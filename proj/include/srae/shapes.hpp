#pragma once

// Procedural meshes used as fixtures and as synthetic deforming sequences.

#include <cstdint>
#include <vector>

#include "srae/mesh.hpp"

namespace srae::shapes {

TriMesh tetrahedron();
TriMesh octahedron();
TriMesh icosahedron();
TriMesh single_triangle();

/// 1->4 midpoint subdivision, applied `times` times. Shared edge midpoints are merged.
TriMesh midpoint_subdivide(const TriMesh& mesh, int times = 1);

/// Icosahedron subdivided `level` times and projected onto the unit sphere (20*4^level faces).
TriMesh icosphere(int level);

/// Planar hexagonal region of equilateral triangles with unit edges, `radius` rings around the
/// origin. Every interior vertex has degree 6.
TriMesh hex_plane(int radius);

struct TubeParams {
    double radius = 0.35;
    double length = 2.0;
    int segments = 24;
    int rings = 20;
    double jitter = 0.0;  // fraction of the ring spacing
    std::uint64_t seed = 1;
};

/// Open cylinder along +z starting at z=0.
TriMesh tube(const TubeParams& params);

/// Bends a mesh laid out along +z by a total angle over `length`, in the xz-plane.
TriMesh bend(const TriMesh& mesh, double total_angle, double length);

/// Frames of a periodically bending tube: angle(t) = max_angle * sin(2 pi t / period).
std::vector<TriMesh> bending_tube_sequence(const TubeParams& params, int frames, int period,
                                           double max_angle);

struct TorusSegmentParams {
    double major_radius = 0.8;
    double minor_radius = 0.25;
    double sweep = 2.0;  // radians
    int sweep_steps = 24;
    int tube_steps = 14;
};

/// Open torus segment (a curved tube).
TriMesh torus_segment(const TorusSegmentParams& params);

/// Frames of a torus segment whose sweep and thickness oscillate with the given period.
std::vector<TriMesh> torus_segment_sequence(const TorusSegmentParams& params, int frames,
                                            int period);

}  // namespace srae::shapes
