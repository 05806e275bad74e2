#pragma once

// Per-base-face padded patches of a semi-regular mesh.

#include <array>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "srae/lattice.hpp"
#include "srae/mesh.hpp"
#include "srae/remesh.hpp"

namespace srae {

enum class CellFill { Copy, Interpolate, Replicate };

struct CellSource {
    CellFill fill = CellFill::Copy;
    int vertex = -1;  // fine vertex for Copy and Replicate
};

/// Cell fill rules of every patch. Depends on topology only.
struct PatchLayout {
    int level = 0;
    int pad_width = 0;
    std::shared_ptr<const LatticeLayout> lattice;
    std::vector<std::vector<CellSource>> cells;  // [base face][valid cell]
    std::size_t fine_vertex_count = 0;

    std::size_t patch_count() const { return cells.size(); }
    std::size_t count(CellFill fill) const;
};

PatchLayout build_layout(const SemiRegularMesh& sr, int pad_width);

/// One patch: square axial storage of `channels` features per cell, cell-major.
struct PatchGrid {
    int base_face = -1;
    int channels = 3;
    std::shared_ptr<const LatticeLayout> lattice;
    std::vector<double> data;  // storage_size * channels, zero on invalid cells
    Vec3 patch_mean = Vec3::Zero();

    int level() const { return lattice->level(); }
    int pad_width() const { return lattice->pad(); }
    bool valid(int i, int j) const { return lattice->cell_index(i, j) >= 0; }
    bool interior(int i, int j) const {
        const int c = lattice->cell_index(i, j);
        return c >= 0 && lattice->interior(c);
    }
    double& at(int i, int j, int ch) { return data[lattice->storage_index(i, j) * channels + ch]; }
    double at(int i, int j, int ch) const { return data[lattice->storage_index(i, j) * channels + ch]; }
    /// Feature of valid cell `cell`.
    double& cell(int cell, int ch) { return data[lattice->cell_storage()[cell] * channels + ch]; }
    double cell(int cell, int ch) const { return data[lattice->cell_storage()[cell] * channels + ch]; }
};

PatchGrid make_patch(std::shared_ptr<const LatticeLayout> lattice, int channels);

/// Fill every patch from fine positions (normally unit-cube normalized) and translate each patch
/// so its interior cells have zero mean.
std::vector<PatchGrid> extract_patches(const PatchLayout& layout, std::span<const Vec3> positions);

/// Rotate the full padded grid by k * 120 degrees.
PatchGrid rotate_patch(const PatchGrid& grid, int k);

/// Per fine vertex: mean over patches whose interior holds it of (cell + patch_mean).
std::vector<Vec3> assemble_positions(std::span<const PatchGrid> grids, const PatchLayout& layout);

/// Mean squared channel difference over interior cells.
double patch_mse(const PatchGrid& a, const PatchGrid& b);

// Binary container: "SRAEPTCH" magic, u32 header length, JSON header, little-endian float32
// storage of every patch.
void save_patch_dataset(std::span<const PatchGrid> patches, const std::filesystem::path& path);
std::vector<PatchGrid> load_patch_dataset(const std::filesystem::path& path);

}  // namespace srae
