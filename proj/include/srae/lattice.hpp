#pragma once

// Padded triangular lattice in axial coordinates. Cell (i,j) of a level-l patch carries the
// barycentric weights (n-i-j, i, j) with n = 2^l on the base face corners. Cells up to `pad`
// lattice steps outside the triangle are valid; storage is the square [-pad, n+pad]^2.

#include <array>
#include <cstddef>
#include <memory>
#include <vector>

namespace srae {

/// Axial neighbour directions in counterclockwise order.
inline constexpr std::array<std::array<int, 2>, 6> kHexDirections{{
    {1, 0}, {0, 1}, {-1, 1}, {-1, 0}, {0, -1}, {1, -1}}};

/// Taps of a radius-r hexagonal kernel: 1 + 3r(r+1).
constexpr int hex_tap_count(int radius) { return 1 + 3 * radius * (radius + 1); }

/// Axial offsets of the kernel taps: centre, then ring 1 from (+1,0) counterclockwise, then ring 2
/// from (+2,0) counterclockwise.
std::vector<std::array<int, 2>> hex_tap_offsets(int radius);

/// Lattice steps a cell lies outside the triangle; 0 for interior cells.
int lattice_outside_distance(int i, int j, int n);

/// T(n+1) + sum_{k=1..w} 3(n + 2k).
int padded_cell_count(int level, int pad);

/// Row-compressed linear map between two cell sets; out[r] = sum_k weight[k] * in[col[k]].
struct SparseMap {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<int> row_begin;  // rows + 1 entries
    std::vector<int> col;
    std::vector<double> weight;
};

class LatticeLayout {
public:
    LatticeLayout(int level, int pad);

    int level() const { return level_; }
    int pad() const { return pad_; }
    int resolution() const { return n_; }
    int side() const { return side_; }
    int storage_size() const { return side_ * side_; }
    int valid_count() const { return static_cast<int>(cells_.size()); }
    int interior_count() const { return interior_count_; }

    int storage_index(int i, int j) const { return (i + pad_) * side_ + (j + pad_); }
    bool in_storage(int i, int j) const {
        return i >= -pad_ && j >= -pad_ && i <= n_ + pad_ && j <= n_ + pad_;
    }
    /// Valid-cell index of (i,j), or -1.
    int cell_index(int i, int j) const { return in_storage(i, j) ? index_[storage_index(i, j)] : -1; }

    /// Valid cells in storage order.
    const std::vector<std::array<int, 2>>& cells() const { return cells_; }
    const std::vector<int>& cell_storage() const { return storage_of_; }
    bool interior(int cell) const { return interior_[cell] != 0; }
    const std::vector<char>& interior_mask() const { return interior_; }
    /// Valid mask over the square storage.
    std::vector<char> storage_valid_mask() const;

    /// Valid-cell neighbour table for a radius-r kernel: table[cell * taps + tap] or -1.
    const std::vector<int>& neighbors(int radius) const;

    /// Valid-cell permutation for one 120 degree rotation (i,j) -> (n-i-j, i):
    /// rotated[perm[c]] = original[c].
    const std::vector<int>& rotation() const { return rotation_; }

private:
    int level_, pad_, n_, side_;
    int interior_count_ = 0;
    std::vector<std::array<int, 2>> cells_;
    std::vector<int> storage_of_;
    std::vector<int> index_;
    std::vector<char> interior_;
    std::vector<int> rotation_;
    mutable std::array<std::vector<int>, 3> neighbor_cache_;
};

/// Shared immutable layout instance.
std::shared_ptr<const LatticeLayout> lattice(int level, int pad);

/// Pad width after pooling a (level, pad) grid.
constexpr int pooled_pad(int pad) { return pad > 0 ? pad - 1 : 0; }

/// Fine (l,w) -> coarse (l-1, pooled_pad(w)): coarse cell (I,J) = mean of fine (2I,2J) and its
/// valid fine neighbours.
SparseMap pool_map(const LatticeLayout& fine, const LatticeLayout& coarse);

/// Coarse -> fine: even cells copy, edge midpoints average their two coarse endpoints when both
/// are valid, everything else is zero.
SparseMap unpool_map(const LatticeLayout& coarse, const LatticeLayout& fine);

}  // namespace srae
