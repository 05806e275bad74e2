#include "srae/patch.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <optional>

#include <json.hpp>

#include "srae/errors.hpp"

namespace srae {

std::size_t PatchLayout::count(CellFill fill) const {
    std::size_t c = 0;
    for (const auto& patch : cells) {
        for (const auto& s : patch) c += s.fill == fill;
    }
    return c;
}

namespace {

// A base face seen from corner vertex v: face (v, xa, xb) in counterclockwise order.
struct FanFace {
    int face;
    int xa, xb;
};

struct CornerFan {
    bool closed = false;
    std::array<std::optional<FanFace>, 6> sectors;
};

std::array<int, 3> rotate_to(const Face& t, int v) {
    if (t[0] == v) return {t[0], t[1], t[2]};
    if (t[1] == v) return {t[1], t[2], t[0]};
    return {t[2], t[0], t[1]};
}

CornerFan corner_fan(const Topology& topo, int f, int k) {
    const Face& t = topo.faces()[f];
    const int v = t[k], x0 = t[(k + 1) % 3], x1 = t[(k + 2) % 3];
    constexpr int kMaxSteps = 64;

    std::vector<FanFace> ccw, cw;
    CornerFan fan;
    int cur = f, lead = x1;
    for (int step = 0; step < kMaxSteps; ++step) {
        const auto& fs = topo.edge_faces(v, lead);
        if (fs.size() != 2) break;
        const int g = fs[0] == cur ? fs[1] : fs[0];
        const auto r = rotate_to(topo.faces()[g], v);
        if (r[1] != lead) break;
        if (g == f) {
            fan.closed = true;
            break;
        }
        ccw.push_back({g, r[1], r[2]});
        lead = r[2];
        cur = g;
    }
    if (fan.closed) {
        cw.assign(ccw.rbegin(), ccw.rend());
    } else {
        cur = f;
        int trail = x0;
        for (int step = 0; step < kMaxSteps; ++step) {
            const auto& fs = topo.edge_faces(v, trail);
            if (fs.size() != 2) break;
            const int g = fs[0] == cur ? fs[1] : fs[0];
            const auto r = rotate_to(topo.faces()[g], v);
            if (r[2] != trail) break;
            cw.push_back({g, r[1], r[2]});
            trail = r[1];
            cur = g;
        }
    }

    fan.sectors[0] = FanFace{f, x0, x1};
    std::vector<int> used{f};
    auto assign = [&](int sector, const std::vector<FanFace>& walk, std::size_t idx) {
        if (idx >= walk.size()) return;
        const FanFace& ff = walk[idx];
        if (std::find(used.begin(), used.end(), ff.face) != used.end()) return;
        used.push_back(ff.face);
        fan.sectors[sector] = ff;
    };
    // nearest sectors first, alternating counterclockwise and clockwise
    assign(1, ccw, 0);
    assign(5, cw, 0);
    assign(2, ccw, 1);
    assign(4, cw, 1);
    assign(3, ccw, 2);
    return fan;
}

int hex_norm(int p, int q) { return (std::abs(p) + std::abs(q) + std::abs(p + q)) / 2; }

// Squared distance between two axial cells in the unfolded equilateral plane.
int plane_sq_dist(const std::array<int, 2>& a, const std::array<int, 2>& b) {
    const int di = a[0] - b[0], dj = a[1] - b[1];
    return di * di + di * dj + dj * dj;
}

}  // namespace

PatchLayout build_layout(const SemiRegularMesh& sr, int pad_width) {
    const int n = sr.resolution();
    if (pad_width < 0 || pad_width > n / 2) throw ValidationError("pad width too large for level");
    PatchLayout layout;
    layout.level = sr.level;
    layout.pad_width = pad_width;
    layout.lattice = lattice(sr.level, pad_width);
    layout.fine_vertex_count = sr.fine_positions.size();
    const LatticeLayout& lat = *layout.lattice;

    const Topology base_topo(sr.base);
    const std::vector<Face> fine_faces = sr.fine_faces();
    const Topology fine_topo(sr.fine_positions.size(), fine_faces);

    auto grid_vertex = [&](const FanFace& ff, int v, int alpha, int beta) {
        const Face& g = sr.base.faces[ff.face];
        std::array<int, 3> w{};
        for (int c = 0; c < 3; ++c) {
            if (g[c] == v) w[c] = n - alpha - beta;
            else if (g[c] == ff.xa) w[c] = alpha;
            else w[c] = beta;
        }
        return sr.vertex_at(ff.face, w[1], w[2]);
    };

    layout.cells.resize(sr.base.faces.size());
    for (std::size_t f = 0; f < sr.base.faces.size(); ++f) {
        const Face& t = sr.base.faces[f];
        std::array<CornerFan, 3> fans;
        for (int k = 0; k < 3; ++k) fans[k] = corner_fan(base_topo, static_cast<int>(f), k);

        auto& cells = layout.cells[f];
        cells.assign(lat.valid_count(), {});
        std::vector<int> unmapped;
        for (int c = 0; c < lat.valid_count(); ++c) {
            const auto [i, j] = lat.cells()[c];
            if (lat.interior(c)) {
                cells[c] = {CellFill::Copy, sr.vertex_at(static_cast<int>(f), i, j)};
                continue;
            }
            const std::array<int, 3> w{n - i - j, i, j};
            std::array<int, 3> order{0, 1, 2};
            std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
                return hex_norm(w[(a + 1) % 3], w[(a + 2) % 3]) < hex_norm(w[(b + 1) % 3], w[(b + 2) % 3]);
            });
            bool mapped = false;
            for (int k : order) {
                int p = w[(k + 1) % 3], q = w[(k + 2) % 3];
                // sector sigma and coordinates along its two rays
                int sigma = 0;
                for (; sigma < 6; ++sigma) {
                    if (p > 0 && q >= 0) break;
                    const int np = p + q, nq = -p;  // rotate 60 degrees clockwise
                    p = np;
                    q = nq;
                }
                if (sigma == 6) continue;
                int alpha = p, beta = q;
                std::optional<FanFace> face = fans[k].sectors[sigma];
                if (!face && beta == 0) {
                    face = fans[k].sectors[(sigma + 5) % 6];
                    beta = alpha;
                    alpha = 0;
                }
                if (!face || alpha + beta > n) continue;
                cells[c] = {CellFill::Copy, grid_vertex(*face, t[k], alpha, beta)};
                mapped = true;
                break;
            }
            if (!mapped) {
                const bool closed = fans[order[0]].closed;
                cells[c] = {closed ? CellFill::Interpolate : CellFill::Replicate, -1};
                if (!closed) unmapped.push_back(c);
            }
        }

        for (int c : unmapped) {
            int best = -1, best_any = -1;
            int best_d = std::numeric_limits<int>::max(), best_any_d = best_d;
            for (int s = 0; s < lat.valid_count(); ++s) {
                if (cells[s].fill != CellFill::Copy) continue;
                const int d = plane_sq_dist(lat.cells()[c], lat.cells()[s]);
                if (d < best_any_d) {
                    best_any_d = d;
                    best_any = s;
                }
                if (d < best_d && fine_topo.is_boundary_vertex(cells[s].vertex)) {
                    best_d = d;
                    best = s;
                }
            }
            if (best < 0) best = best_any;
            cells[c].vertex = cells[best].vertex;
        }
    }
    return layout;
}

PatchGrid make_patch(std::shared_ptr<const LatticeLayout> lat, int channels) {
    if (channels < 1) throw ValidationError("patch needs at least one channel");
    PatchGrid g;
    g.channels = channels;
    g.data.assign(static_cast<std::size_t>(lat->storage_size()) * channels, 0.0);
    g.lattice = std::move(lat);
    return g;
}

std::vector<PatchGrid> extract_patches(const PatchLayout& layout, std::span<const Vec3> positions) {
    if (positions.size() != layout.fine_vertex_count) {
        throw ValidationError("position count does not match the patch layout");
    }
    constexpr int kMaxSweeps = 10;
    const LatticeLayout& lat = *layout.lattice;
    const auto& nbr = lat.neighbors(1);
    std::vector<PatchGrid> out;
    out.reserve(layout.patch_count());
    for (std::size_t f = 0; f < layout.patch_count(); ++f) {
        PatchGrid g = make_patch(layout.lattice, 3);
        g.base_face = static_cast<int>(f);
        const auto& cells = layout.cells[f];
        std::vector<char> filled(lat.valid_count(), 0);
        std::size_t pending = 0;
        for (int c = 0; c < lat.valid_count(); ++c) {
            if (cells[c].fill == CellFill::Interpolate) {
                ++pending;
                continue;
            }
            for (int ch = 0; ch < 3; ++ch) g.cell(c, ch) = positions[cells[c].vertex][ch];
            filled[c] = 1;
        }
        for (int sweep = 0; sweep < kMaxSweeps && pending > 0; ++sweep) {
            std::vector<std::pair<int, Vec3>> updates;
            for (int c = 0; c < lat.valid_count(); ++c) {
                if (filled[c]) continue;
                Vec3 sum = Vec3::Zero();
                int k = 0;
                for (int t = 1; t < 7; ++t) {
                    const int u = nbr[c * 7 + t];
                    if (u < 0 || !filled[u]) continue;
                    sum += Vec3(g.cell(u, 0), g.cell(u, 1), g.cell(u, 2));
                    ++k;
                }
                if (k > 0) updates.emplace_back(c, sum / k);
            }
            for (const auto& [c, p] : updates) {
                for (int ch = 0; ch < 3; ++ch) g.cell(c, ch) = p[ch];
                filled[c] = 1;
                --pending;
            }
        }
        if (pending > 0) {
            throw ValidationError("patch " + std::to_string(f) + ": interpolated cells left unfilled");
        }

        Vec3 mean = Vec3::Zero();
        for (int c = 0; c < lat.valid_count(); ++c) {
            if (lat.interior(c)) mean += Vec3(g.cell(c, 0), g.cell(c, 1), g.cell(c, 2));
        }
        mean /= lat.interior_count();
        for (int c = 0; c < lat.valid_count(); ++c) {
            for (int ch = 0; ch < 3; ++ch) g.cell(c, ch) -= mean[ch];
        }
        g.patch_mean = mean;
        out.push_back(std::move(g));
    }
    return out;
}

PatchGrid rotate_patch(const PatchGrid& grid, int k) {
    k = ((k % 3) + 3) % 3;
    PatchGrid out = grid;
    const LatticeLayout& lat = *grid.lattice;
    const auto& perm = lat.rotation();
    const auto& storage = lat.cell_storage();
    for (int step = 0; step < k; ++step) {
        PatchGrid next = out;
        for (int c = 0; c < lat.valid_count(); ++c) {
            for (int ch = 0; ch < grid.channels; ++ch) {
                next.data[storage[perm[c]] * grid.channels + ch] = out.data[storage[c] * grid.channels + ch];
            }
        }
        out = std::move(next);
    }
    return out;
}

std::vector<Vec3> assemble_positions(std::span<const PatchGrid> grids, const PatchLayout& layout) {
    if (grids.size() != layout.patch_count()) throw ValidationError("missing patch for assembly");
    std::vector<Vec3> sum(layout.fine_vertex_count, Vec3::Zero());
    std::vector<int> count(layout.fine_vertex_count, 0);
    const LatticeLayout& lat = *layout.lattice;
    for (std::size_t f = 0; f < grids.size(); ++f) {
        const PatchGrid& g = grids[f];
        if (g.lattice->level() != lat.level() || g.lattice->pad() != lat.pad() || g.channels < 3) {
            throw ValidationError("patch grid does not match the layout");
        }
        for (int c = 0; c < lat.valid_count(); ++c) {
            if (!lat.interior(c)) continue;
            const int v = layout.cells[f][c].vertex;
            sum[v] += Vec3(g.cell(c, 0), g.cell(c, 1), g.cell(c, 2)) + g.patch_mean;
            ++count[v];
        }
    }
    for (std::size_t v = 0; v < sum.size(); ++v) {
        if (count[v] == 0) throw ValidationError("fine vertex " + std::to_string(v) + " lies in no patch");
        sum[v] /= count[v];
    }
    return sum;
}

double patch_mse(const PatchGrid& a, const PatchGrid& b) {
    if (a.lattice->level() != b.lattice->level() || a.lattice->pad() != b.lattice->pad() ||
        a.channels != b.channels) {
        throw ValidationError("patch shape mismatch");
    }
    const LatticeLayout& lat = *a.lattice;
    double s = 0.0;
    for (int c = 0; c < lat.valid_count(); ++c) {
        if (!lat.interior(c)) continue;
        for (int ch = 0; ch < a.channels; ++ch) {
            const double d = a.cell(c, ch) - b.cell(c, ch);
            s += d * d;
        }
    }
    return s / (static_cast<double>(lat.interior_count()) * a.channels);
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'S', 'R', 'A', 'E', 'P', 'T', 'C', 'H'};

void put_u32(std::ostream& out, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

std::uint32_t get_u32(const unsigned char* b) {
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_patch_dataset(std::span<const PatchGrid> patches, const std::filesystem::path& path) {
    if (patches.empty()) throw ValidationError("empty patch dataset");
    const auto& lat = patches.front().lattice;
    const int channels = patches.front().channels;
    nlohmann::json header;
    header["version"] = 1;
    header["level"] = lat->level();
    header["pad_width"] = lat->pad();
    header["side"] = lat->side();
    header["patch_count"] = patches.size();
    header["channels"] = channels;
    std::string mask;
    for (char m : lat->storage_valid_mask()) mask.push_back(m ? '1' : '0');
    header["mask"] = mask;
    nlohmann::json faces = nlohmann::json::array(), means = nlohmann::json::array();
    for (const auto& p : patches) {
        if (p.lattice->level() != lat->level() || p.lattice->pad() != lat->pad() || p.channels != channels) {
            throw ValidationError("patch dataset entries must share one layout");
        }
        faces.push_back(p.base_face);
        means.push_back({p.patch_mean.x(), p.patch_mean.y(), p.patch_mean.z()});
    }
    header["base_faces"] = faces;
    header["patch_means"] = means;
    const std::string text = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(kMagic, sizeof kMagic);
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& p : patches) {
        for (double v : p.data) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<PatchGrid> load_patch_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto* b = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
        throw ParseError(path.string() + ": not a patch dataset", 0);
    }
    const std::uint32_t hlen = get_u32(b + 8);
    if (bytes.size() < 12 + static_cast<std::size_t>(hlen)) throw ParseError(path.string() + ": truncated header", 0);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(12, hlen));
        const int level = header.at("level").get<int>();
        const int pad = header.at("pad_width").get<int>();
        const int channels = header.at("channels").get<int>();
        const auto count = header.at("patch_count").get<std::size_t>();
        auto lat = lattice(level, pad);
        std::string mask;
        for (char m : lat->storage_valid_mask()) mask.push_back(m ? '1' : '0');
        if (header.at("mask").get<std::string>() != mask) throw ValidationError("patch mask does not match layout");
        const auto faces = header.at("base_faces").get<std::vector<int>>();
        const auto means = header.at("patch_means").get<std::vector<std::array<double, 3>>>();
        if (faces.size() != count || means.size() != count) throw ValidationError("patch metadata count mismatch");
        const std::size_t per = static_cast<std::size_t>(lat->storage_size()) * channels;
        const std::size_t need = 12 + hlen + count * per * 4;
        if (bytes.size() != need) throw ParseError(path.string() + ": data size mismatch (truncated or corrupt)", 0);
        std::vector<PatchGrid> out;
        out.reserve(count);
        const unsigned char* p = b + 12 + hlen;
        for (std::size_t k = 0; k < count; ++k) {
            PatchGrid g = make_patch(lat, channels);
            g.base_face = faces[k];
            g.patch_mean = Vec3(means[k][0], means[k][1], means[k][2]);
            for (std::size_t e = 0; e < per; ++e, p += 4) g.data[e] = std::bit_cast<float>(get_u32(p));
            out.push_back(std::move(g));
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what(), 0);
    }
}

}  // namespace srae
