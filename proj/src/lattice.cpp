#include "srae/lattice.hpp"

#include <algorithm>
#include <map>
#include <mutex>

#include "srae/errors.hpp"

namespace srae {

std::vector<std::array<int, 2>> hex_tap_offsets(int radius) {
    if (radius < 0 || radius > 2) throw ValidationError("kernel radius must be 0, 1 or 2");
    std::vector<std::array<int, 2>> taps{{0, 0}};
    for (int r = 1; r <= radius; ++r) {
        int i = r * kHexDirections[0][0], j = r * kHexDirections[0][1];
        for (int s = 0; s < 6; ++s) {
            const auto& d = kHexDirections[(s + 2) % 6];
            for (int k = 0; k < r; ++k) {
                taps.push_back({i, j});
                i += d[0];
                j += d[1];
            }
        }
    }
    return taps;
}

int lattice_outside_distance(int i, int j, int n) {
    return std::max(0, -i) + std::max(0, -j) + std::max(0, i + j - n);
}

int padded_cell_count(int level, int pad) {
    const int n = 1 << level;
    int count = (n + 1) * (n + 2) / 2;
    for (int k = 1; k <= pad; ++k) count += 3 * (n + 2 * k);
    return count;
}

LatticeLayout::LatticeLayout(int level, int pad) : level_(level), pad_(pad) {
    if (level < 0 || level > 8) throw ValidationError("lattice level out of range");
    if (pad < 0) throw ValidationError("pad width must be non-negative");
    n_ = 1 << level;
    if (level > 0 && pad > n_ / 2) throw ValidationError("pad width too large for level");
    if (level == 0 && pad > 0) throw ValidationError("pad width too large for level");
    side_ = n_ + 1 + 2 * pad_;
    index_.assign(storage_size(), -1);
    for (int i = -pad_; i <= n_ + pad_; ++i) {
        for (int j = -pad_; j <= n_ + pad_; ++j) {
            const int d = lattice_outside_distance(i, j, n_);
            if (d > pad_) continue;
            index_[storage_index(i, j)] = static_cast<int>(cells_.size());
            cells_.push_back({i, j});
            storage_of_.push_back(storage_index(i, j));
            interior_.push_back(d == 0 ? 1 : 0);
            interior_count_ += d == 0;
        }
    }
    rotation_.resize(cells_.size());
    for (std::size_t c = 0; c < cells_.size(); ++c) {
        const auto [i, j] = cells_[c];
        rotation_[c] = cell_index(n_ - i - j, i);
    }
}

std::vector<char> LatticeLayout::storage_valid_mask() const {
    std::vector<char> mask(storage_size(), 0);
    for (int s : storage_of_) mask[s] = 1;
    return mask;
}

const std::vector<int>& LatticeLayout::neighbors(int radius) const {
    if (radius < 0 || radius > 2) throw ValidationError("kernel radius must be 0, 1 or 2");
    static std::mutex mu;
    std::lock_guard lock(mu);
    auto& table = neighbor_cache_[radius];
    if (table.empty()) {
        const auto taps = hex_tap_offsets(radius);
        table.reserve(cells_.size() * taps.size());
        for (const auto& [i, j] : cells_) {
            for (const auto& [di, dj] : taps) table.push_back(cell_index(i + di, j + dj));
        }
    }
    return table;
}

std::shared_ptr<const LatticeLayout> lattice(int level, int pad) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::shared_ptr<const LatticeLayout>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[{level, pad}];
    if (!slot) slot = std::make_shared<const LatticeLayout>(level, pad);
    return slot;
}

SparseMap pool_map(const LatticeLayout& fine, const LatticeLayout& coarse) {
    if (fine.level() < 1) throw ValidationError("cannot pool a level-0 grid");
    if (coarse.level() != fine.level() - 1 || coarse.pad() != pooled_pad(fine.pad())) {
        throw ValidationError("pooling layout mismatch");
    }
    SparseMap m;
    m.rows = coarse.valid_count();
    m.cols = fine.valid_count();
    m.row_begin.push_back(0);
    for (const auto& [ci, cj] : coarse.cells()) {
        const int i = 2 * ci, j = 2 * cj;
        std::vector<int> members{fine.cell_index(i, j)};
        if (members[0] < 0) throw ValidationError("pooled cell has no fine counterpart");
        for (const auto& d : kHexDirections) {
            const int c = fine.cell_index(i + d[0], j + d[1]);
            if (c >= 0) members.push_back(c);
        }
        const double w = 1.0 / static_cast<double>(members.size());
        for (int c : members) {
            m.col.push_back(c);
            m.weight.push_back(w);
        }
        m.row_begin.push_back(static_cast<int>(m.col.size()));
    }
    return m;
}

SparseMap unpool_map(const LatticeLayout& coarse, const LatticeLayout& fine) {
    if (coarse.level() != fine.level() - 1) throw ValidationError("unpooling layout mismatch");
    SparseMap m;
    m.rows = fine.valid_count();
    m.cols = coarse.valid_count();
    m.row_begin.push_back(0);
    auto coarse_at = [&](int i, int j) { return coarse.cell_index(i / 2, j / 2); };
    for (const auto& [i, j] : fine.cells()) {
        const bool ei = (i % 2) == 0, ej = (j % 2) == 0;
        if (ei && ej) {
            const int c = coarse_at(i, j);
            if (c >= 0) {
                m.col.push_back(c);
                m.weight.push_back(1.0);
            }
        } else {
            std::array<int, 4> ends{};
            if (!ei && ej) {
                ends = {i - 1, j, i + 1, j};
            } else if (ei && !ej) {
                ends = {i, j - 1, i, j + 1};
            } else {
                ends = {i + 1, j - 1, i - 1, j + 1};
            }
            const int a = coarse_at(ends[0], ends[1]);
            const int b = coarse_at(ends[2], ends[3]);
            if (a >= 0 && b >= 0) {
                m.col.push_back(a);
                m.weight.push_back(0.5);
                m.col.push_back(b);
                m.weight.push_back(0.5);
            }
        }
        m.row_begin.push_back(static_cast<int>(m.col.size()));
    }
    return m;
}

}  // namespace srae
