#include <algorithm>
#include <cmath>

#include "srae/errors.hpp"
#include "srae/remesh.hpp"
#include "srae/spatial.hpp"

namespace srae {

double chamfer_avg(std::span<const Vec3> a, std::span<const Vec3> b) {
    if (a.empty() || b.empty()) throw ValidationError("chamfer distance of an empty point set");
    const KdTree ta(a), tb(b);
    double sa = 0.0, sb = 0.0;
    for (const Vec3& p : a) sa += tb.nearest(p).sq_dist;
    for (const Vec3& p : b) sb += ta.nearest(p).sq_dist;
    return sa / static_cast<double>(a.size()) + sb / static_cast<double>(b.size());
}

ChamferResult chamfer_avg_with_grad(std::span<const Vec3> a, std::span<const Vec3> b) {
    if (a.empty() || b.empty()) throw ValidationError("chamfer distance of an empty point set");
    const KdTree ta(a), tb(b);
    ChamferResult r;
    r.grad_a.assign(a.size(), Vec3::Zero());
    r.grad_b.assign(b.size(), Vec3::Zero());
    const double ia = 1.0 / static_cast<double>(a.size());
    const double ib = 1.0 / static_cast<double>(b.size());
    double sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto hit = tb.nearest(a[i]);
        sa += hit.sq_dist;
        const Vec3 d = 2.0 * ia * (a[i] - b[hit.index]);
        r.grad_a[i] += d;
        r.grad_b[hit.index] -= d;
    }
    for (std::size_t j = 0; j < b.size(); ++j) {
        const auto hit = ta.nearest(b[j]);
        sb += hit.sq_dist;
        const Vec3 d = 2.0 * ib * (b[j] - a[hit.index]);
        r.grad_b[j] += d;
        r.grad_a[hit.index] -= d;
    }
    r.value = sa * ia + sb * ib;
    return r;
}

double surface_chamfer(const TriMesh& a, const TriMesh& b, std::size_t samples, std::uint64_t seed) {
    const auto pa = sample_surface(a, samples, derive_seed(seed, "chamfer-a"));
    const auto pb = sample_surface(b, samples, derive_seed(seed, "chamfer-b"));
    return chamfer_avg(pa, pb);
}

// ---------------------------------------------------------------------------

Regularizers::Regularizers(std::size_t vertex_count, std::span<const Face> faces)
    : faces_(faces.begin(), faces.end()) {
    const Topology topo(vertex_count, faces);
    edges_ = topo.edges();
    neighbors_.assign(vertex_count, {});
    boundary_.assign(vertex_count, 0);
    for (const auto& e : edges_) {
        neighbors_[e[0]].push_back(e[1]);
        neighbors_[e[1]].push_back(e[0]);
        const auto& fs = topo.edge_faces(e[0], e[1]);
        if (fs.size() == 1) boundary_[e[0]] = boundary_[e[1]] = 1;
        if (fs.size() == 2) face_pairs_.push_back({fs[0], fs[1]});
    }
    for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());
}

LossGrad Regularizers::edge_length(std::span<const Vec3> pos) const {
    LossGrad out;
    out.grad.assign(pos.size(), Vec3::Zero());
    if (edges_.empty()) return out;
    const double inv = 1.0 / static_cast<double>(edges_.size());
    for (const auto& e : edges_) {
        const Vec3 d = pos[e[0]] - pos[e[1]];
        out.value += d.squaredNorm();
        out.grad[e[0]] += 2.0 * inv * d;
        out.grad[e[1]] -= 2.0 * inv * d;
    }
    out.value *= inv;
    return out;
}

LossGrad Regularizers::laplacian(std::span<const Vec3> pos, bool interior_only) const {
    LossGrad out;
    out.grad.assign(pos.size(), Vec3::Zero());
    std::size_t count = 0;
    for (std::size_t v = 0; v < pos.size(); ++v) {
        if (neighbors_[v].empty() || (interior_only && boundary_[v])) continue;
        ++count;
    }
    if (count == 0) return out;
    const double inv = 1.0 / static_cast<double>(count);
    for (std::size_t v = 0; v < pos.size(); ++v) {
        const auto& nb = neighbors_[v];
        if (nb.empty() || (interior_only && boundary_[v])) continue;
        Vec3 centroid = Vec3::Zero();
        for (int u : nb) centroid += pos[u];
        const double w = 1.0 / static_cast<double>(nb.size());
        const Vec3 lap = w * centroid - pos[v];
        out.value += lap.squaredNorm();
        const Vec3 g = 2.0 * inv * lap;
        out.grad[v] -= g;
        for (int u : nb) out.grad[u] += w * g;
    }
    out.value *= inv;
    return out;
}

LossGrad Regularizers::normal_consistency(std::span<const Vec3> pos) const {
    LossGrad out;
    out.grad.assign(pos.size(), Vec3::Zero());
    auto normal = [&](const Face& f) {
        return Vec3((pos[f[1]] - pos[f[0]]).cross(pos[f[2]] - pos[f[0]]));
    };
    // d(g . n)/d vertex for n = (b-a) x (c-a)
    auto scatter = [&](const Face& f, const Vec3& g, double scale) {
        const Vec3 &a = pos[f[0]], &b = pos[f[1]], &c = pos[f[2]];
        out.grad[f[0]] += scale * (b - c).cross(g);
        out.grad[f[1]] += scale * (c - a).cross(g);
        out.grad[f[2]] += scale * (a - b).cross(g);
    };

    struct Term {
        int f0, f1;
        Vec3 g0, g1;
    };
    std::vector<Term> terms;
    terms.reserve(face_pairs_.size());
    double sum = 0.0;
    for (const auto& pr : face_pairs_) {
        const Vec3 n0 = normal(faces_[pr[0]]), n1 = normal(faces_[pr[1]]);
        const double l0 = n0.norm(), l1 = n1.norm();
        if (l0 < 1e-14 || l1 < 1e-14) {
            ++out.skipped;
            continue;
        }
        const double cosv = n0.dot(n1) / (l0 * l1);
        sum += 1.0 - cosv;
        // d cos / d n0 and d cos / d n1
        const Vec3 g0 = n1 / (l0 * l1) - cosv * n0 / (l0 * l0);
        const Vec3 g1 = n0 / (l0 * l1) - cosv * n1 / (l1 * l1);
        terms.push_back({pr[0], pr[1], g0, g1});
    }
    if (terms.empty()) return out;
    const double inv = 1.0 / static_cast<double>(terms.size());
    out.value = sum * inv;
    for (const Term& t : terms) {
        scatter(faces_[t.f0], t.g0, -inv);
        scatter(faces_[t.f1], t.g1, -inv);
    }
    return out;
}

LossGrad edge_length_loss(std::span<const Vec3> pos, std::span<const Face> faces) {
    return Regularizers(pos.size(), faces).edge_length(pos);
}

LossGrad laplacian_loss(std::span<const Vec3> pos, std::span<const Face> faces, bool interior_only) {
    return Regularizers(pos.size(), faces).laplacian(pos, interior_only);
}

LossGrad normal_consistency_loss(std::span<const Vec3> pos, std::span<const Face> faces) {
    return Regularizers(pos.size(), faces).normal_consistency(pos);
}

// ---------------------------------------------------------------------------

void validate(const FitConfig& cfg) {
    if (cfg.samples < 100) throw ValidationError("fit sample count must be >= 100");
    if (cfg.steps < 0) throw ValidationError("fit step count must be >= 0");
    if (cfg.w_chamfer < 0 || cfg.w_edge < 0 || cfg.w_normal < 0 || cfg.w_laplacian < 0) {
        throw ValidationError("fit loss weights must be non-negative");
    }
    if (!(cfg.learning_rate > 0)) throw ValidationError("fit learning rate must be positive");
    if (cfg.momentum < 0 || cfg.momentum >= 1) throw ValidationError("fit momentum must be in [0,1)");
}

namespace {

struct Objective {
    const FitConfig& cfg;
    const Regularizers& reg;
    std::span<const Face> faces;

    // Loss terms and gradient for given SR samples (face + barycentrics) and target points.
    FitTerms evaluate(std::span<const Vec3> pos, std::span<const SurfaceSample> samples,
                      std::span<const Vec3> target, std::vector<Vec3>* grad) const {
        std::vector<Vec3> pts;
        pts.reserve(samples.size());
        for (const auto& s : samples) {
            const Face& f = faces[s.face];
            pts.push_back(s.bary[0] * pos[f[0]] + s.bary[1] * pos[f[1]] + s.bary[2] * pos[f[2]]);
        }
        FitTerms t;
        const ChamferResult ch = chamfer_avg_with_grad(target, pts);
        const LossGrad e = reg.edge_length(pos);
        const LossGrad n = reg.normal_consistency(pos);
        const LossGrad l = reg.laplacian(pos);
        t.chamfer = ch.value;
        t.edge = e.value;
        t.normal = n.value;
        t.laplacian = l.value;
        t.total = cfg.w_chamfer * t.chamfer + cfg.w_edge * t.edge + cfg.w_normal * t.normal +
                  cfg.w_laplacian * t.laplacian;
        if (grad) {
            grad->assign(pos.size(), Vec3::Zero());
            for (std::size_t k = 0; k < samples.size(); ++k) {
                const Face& f = faces[samples[k].face];
                for (int c = 0; c < 3; ++c) (*grad)[f[c]] += cfg.w_chamfer * samples[k].bary[c] * ch.grad_b[k];
            }
            for (std::size_t v = 0; v < pos.size(); ++v) {
                (*grad)[v] += cfg.w_edge * e.grad[v] + cfg.w_normal * n.grad[v] + cfg.w_laplacian * l.grad[v];
            }
        }
        return t;
    }
};

}  // namespace

FitResult fit_semiregular(const SemiRegularMesh& sr, const TriMesh& target, const FitConfig& cfg) {
    validate(cfg);
    validate(target);
    const std::vector<Face> faces = sr.fine_faces();
    const Regularizers reg(sr.fine_positions.size(), faces);
    const Objective obj{cfg, reg, faces};
    const std::vector<Vec3>& init = sr.fine_positions;

    std::vector<Vec3> offsets(init.size(), Vec3::Zero());
    std::vector<Vec3> velocity(init.size(), Vec3::Zero());
    std::vector<Vec3> pos = init;

    // Fixed evaluation samples make the initial and final losses comparable.
    auto evaluate_fixed = [&](std::span<const Vec3> p) {
        Rng rng_t(derive_seed(cfg.seed, "fit-eval-target"));
        Rng rng_s(derive_seed(cfg.seed, "fit-eval-source"));
        const auto tgt = sample_surface_detailed(target.vertices, target.faces, cfg.samples, rng_t);
        const auto src = sample_surface_detailed(p, faces, cfg.samples, rng_s);
        std::vector<Vec3> tp;
        tp.reserve(tgt.size());
        for (const auto& s : tgt) tp.push_back(s.point);
        return obj.evaluate(p, src, tp, nullptr);
    };

    FitResult res;
    res.initial = evaluate_fixed(pos);

    Rng rng_target(derive_seed(cfg.seed, "fit-target"));
    Rng rng_source(derive_seed(cfg.seed, "fit-source"));
    std::vector<SurfaceSample> src_samples;
    std::vector<Vec3> tgt_points;
    auto draw_target = [&] {
        tgt_points.clear();
        for (const auto& s : sample_surface_detailed(target.vertices, target.faces, cfg.samples, rng_target)) {
            tgt_points.push_back(s.point);
        }
    };
    if (!cfg.resample) {
        draw_target();
        src_samples = sample_surface_detailed(pos, faces, cfg.samples, rng_source);
    }

    std::vector<Vec3> grad;
    double first_loss = 0.0;
    res.loss_history.reserve(cfg.steps);
    for (int step = 0; step < cfg.steps; ++step) {
        if (cfg.resample) {
            draw_target();
            src_samples = sample_surface_detailed(pos, faces, cfg.samples, rng_source);
        }
        const FitTerms t = obj.evaluate(pos, src_samples, tgt_points, &grad);
        if (!std::isfinite(t.total)) {
            throw NumericalError("fit loss became non-finite at step " + std::to_string(step));
        }
        if (step == 0) first_loss = t.total;
        if (t.total > 10.0 * std::max(first_loss, res.initial.total)) {
            throw NumericalError("fit diverged at step " + std::to_string(step) + ": loss " +
                                 std::to_string(t.total) + " exceeds 10x the initial loss");
        }
        res.loss_history.push_back(t.total);
        for (std::size_t v = 0; v < pos.size(); ++v) {
            velocity[v] = cfg.momentum * velocity[v] + grad[v];
            offsets[v] -= cfg.learning_rate * velocity[v];
            pos[v] = init[v] + offsets[v];
        }
    }

    res.final = evaluate_fixed(pos);
    res.offsets = std::move(offsets);
    res.mesh = sr.with_positions(std::move(pos));
    return res;
}

// ---------------------------------------------------------------------------

BarycentricParam project_parametrize(std::span<const Vec3> points, const TriMesh& templ) {
    validate(templ);
    if (templ.faces.empty()) throw ValidationError("template mesh has no faces");
    const TriangleBvh bvh(templ.vertices, templ.faces);
    BarycentricParam p;
    p.template_vertex_count = templ.vertices.size();
    p.template_faces = templ.faces;
    p.face.reserve(points.size());
    p.bary.reserve(points.size());
    for (const Vec3& q : points) {
        const auto hit = bvh.closest(q);
        p.face.push_back(hit.face);
        p.bary.push_back(hit.closest.bary);
    }
    return p;
}

BarycentricParam project_parametrize(const SemiRegularMesh& sr, const TriMesh& templ) {
    return project_parametrize(sr.fine_positions, templ);
}

std::vector<Vec3> apply_parametrization(const BarycentricParam& param, const TriMesh& deformed) {
    if (deformed.vertices.size() != param.template_vertex_count || deformed.faces != param.template_faces) {
        throw ValidationError("deformed mesh topology does not match the template");
    }
    std::vector<Vec3> out;
    out.reserve(param.face.size());
    for (std::size_t k = 0; k < param.face.size(); ++k) {
        const Face& f = deformed.faces[param.face[k]];
        const auto& b = param.bary[k];
        out.push_back(b[0] * deformed.vertices[f[0]] + b[1] * deformed.vertices[f[1]] + b[2] * deformed.vertices[f[2]]);
    }
    return out;
}

}  // namespace srae
