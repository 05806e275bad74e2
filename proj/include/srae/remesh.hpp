#pragma once

// Semi-regular remeshing: quadric simplification, uniform subdivision, chamfer fitting and
// barycentric transfer across a deforming sequence.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "srae/mesh.hpp"

namespace srae {

// ---------------------------------------------------------------------------
// Quadric error metrics and simplification

struct Quadric {
    Eigen::Matrix4d m = Eigen::Matrix4d::Zero();

    double eval(const Vec3& p) const {
        const Eigen::Vector4d h(p.x(), p.y(), p.z(), 1.0);
        return h.dot(m * h);
    }
    Quadric& operator+=(const Quadric& o) {
        m += o.m;
        return *this;
    }
    friend Quadric operator+(Quadric a, const Quadric& b) { return a += b; }
};

/// Area-weighted plane quadric of the plane through `a` with unit normal `n`.
Quadric plane_quadric(const Vec3& n, const Vec3& a, double weight);

/// Per vertex: sum over incident faces of area * (plane outer product).
std::vector<Quadric> compute_vertex_quadrics(const TriMesh& mesh);

struct CollapseCost {
    double cost;
    Vec3 position;
    bool singular;  // quadric system singular; position is the edge midpoint
};

/// Combined quadric error at the optimal position plus lambda_edge * length^2.
CollapseCost collapse_cost(const TriMesh& mesh, std::span<const Quadric> quadrics,
                           std::array<int, 2> edge, double lambda_edge);
CollapseCost collapse_cost(const Vec3& pa, const Vec3& pb, const Quadric& qa, const Quadric& qb,
                           double lambda_edge);

struct SimplifyResult {
    TriMesh mesh;
    bool reached_target = true;  // false: every remaining collapse was rejected
    std::size_t collapses = 0;
};

/// Greedy minimum-cost edge collapse until the face count is <= target_faces. Collapses that
/// would create non-manifold edges, flip a face or pull the boundary inward are rejected.
SimplifyResult simplify(const TriMesh& mesh, std::size_t target_faces, double lambda_edge);

// ---------------------------------------------------------------------------
// Semi-regular meshes

/// A base mesh subdivided `level` times. Fine vertex ids 0..V-1 are the base vertices.
/// patch_grids[f] lists fine vertex ids of base face f at lattice (i,j), i+j <= 2^level,
/// row-major in i. (i,j) is the point with weight i on the face's second vertex and j on
/// its third.
struct SemiRegularMesh {
    TriMesh base;
    int level = 1;
    std::vector<Vec3> fine_positions;
    std::vector<std::vector<int>> patch_grids;

    int resolution() const { return 1 << level; }
    static int grid_index(int i, int j, int n) { return i * (n + 1) - i * (i - 1) / 2 + j; }
    static int grid_size(int n) { return (n + 1) * (n + 2) / 2; }
    int vertex_at(int face, int i, int j) const {
        return patch_grids[face][grid_index(i, j, resolution())];
    }

    /// Fine faces, 4^level per base face, grouped by base face.
    std::vector<Face> fine_faces() const;
    TriMesh fine_mesh() const;

    /// Copy with new fine positions; base vertex positions follow their fine counterparts.
    SemiRegularMesh with_positions(std::vector<Vec3> positions) const;
};

SemiRegularMesh subdivide(const TriMesh& base, int level);

void save_srm(const SemiRegularMesh& sr, const std::filesystem::path& path);
SemiRegularMesh load_srm(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Fitting

/// Symmetric mean of squared nearest-neighbour distances.
double chamfer_avg(std::span<const Vec3> a, std::span<const Vec3> b);

struct ChamferResult {
    double value = 0.0;
    std::vector<Vec3> grad_a;  // d value / d a_i with nearest neighbours held fixed
    std::vector<Vec3> grad_b;
};
ChamferResult chamfer_avg_with_grad(std::span<const Vec3> a, std::span<const Vec3> b);

/// chamfer_avg between `samples` area-uniform points drawn from each surface. The estimate is
/// biased upward by roughly 2 / (pi * density); use large sample counts when measuring quality.
double surface_chamfer(const TriMesh& a, const TriMesh& b, std::size_t samples, std::uint64_t seed);

struct LossGrad {
    double value = 0.0;
    std::vector<Vec3> grad;
    std::size_t skipped = 0;  // degenerate face pairs left out of the normal loss
};

/// Mesh regularizers over a fixed connectivity.
class Regularizers {
public:
    Regularizers(std::size_t vertex_count, std::span<const Face> faces);

    /// Mean squared edge length.
    LossGrad edge_length(std::span<const Vec3> pos) const;
    /// Mean squared norm of the uniform Laplacian (neighbour centroid minus vertex).
    LossGrad laplacian(std::span<const Vec3> pos, bool interior_only = false) const;
    /// Mean of (1 - cos) between normals of faces sharing an edge.
    LossGrad normal_consistency(std::span<const Vec3> pos) const;

private:
    std::vector<Face> faces_;
    std::vector<std::array<int, 2>> edges_;
    std::vector<std::vector<int>> neighbors_;
    std::vector<char> boundary_;
    std::vector<std::array<int, 2>> face_pairs_;
};

LossGrad edge_length_loss(std::span<const Vec3> pos, std::span<const Face> faces);
LossGrad laplacian_loss(std::span<const Vec3> pos, std::span<const Face> faces,
                        bool interior_only = false);
LossGrad normal_consistency_loss(std::span<const Vec3> pos, std::span<const Face> faces);

struct FitConfig {
    std::size_t samples = 5000;
    int steps = 2000;
    double learning_rate = 1.0;
    double momentum = 0.9;
    double w_chamfer = 1.0;
    double w_edge = 1.0;
    double w_normal = 0.01;
    double w_laplacian = 0.1;
    std::uint64_t seed = 0;
    bool resample = true;  // fresh surface samples every step
};

/// Throws ValidationError when the configuration violates its invariants.
void validate(const FitConfig& cfg);

struct FitTerms {
    double chamfer = 0.0, edge = 0.0, normal = 0.0, laplacian = 0.0, total = 0.0;
};

struct FitResult {
    SemiRegularMesh mesh;
    std::vector<Vec3> offsets;
    FitTerms initial;
    FitTerms final;
    std::vector<double> loss_history;  // per-step training loss
};

/// Gradient descent on per-fine-vertex offsets minimising the weighted chamfer+regularizer loss.
FitResult fit_semiregular(const SemiRegularMesh& sr, const TriMesh& target, const FitConfig& cfg);

// ---------------------------------------------------------------------------
// Parametrization transfer

struct BarycentricParam {
    std::vector<int> face;
    std::vector<std::array<double, 3>> bary;
    std::size_t template_vertex_count = 0;
    std::vector<Face> template_faces;
};

BarycentricParam project_parametrize(std::span<const Vec3> points, const TriMesh& templ);
BarycentricParam project_parametrize(const SemiRegularMesh& sr, const TriMesh& templ);

/// Positions on `deformed` at the stored barycentric coordinates. Throws ValidationError when
/// `deformed` does not share the template's topology.
std::vector<Vec3> apply_parametrization(const BarycentricParam& param, const TriMesh& deformed);

}  // namespace srae
