// Acceptance runner: one PASS/FAIL/SKIP line per criterion, nonzero exit on any FAIL.
//
//   acceptance [--only N[,M...]]
//
// Criterion 10 runs when SRAE_GALLOP_DIR points at a directory holding horse/ and camel/ frame
// folders (.obj/.off).

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "srae/errors.hpp"
#include "srae/model.hpp"
#include "srae/patch.hpp"
#include "srae/pipeline.hpp"
#include "srae/shapes.hpp"

using namespace srae;
using oracle::DMatrix;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    enum Kind { Pass, Fail, Skip } kind = Fail;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

Outcome verdict(bool ok, std::string detail) { return {ok ? Outcome::Pass : Outcome::Fail, std::move(detail)}; }

std::vector<Vec3> random_points(std::size_t n, Rng& rng) {
    std::vector<Vec3> p(n);
    for (auto& v : p) v = Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    return p;
}

Eigen::VectorXd to_vec(const std::vector<Vec3>& g) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(3 * g.size()));
    for (std::size_t k = 0; k < g.size(); ++k) v.segment<3>(static_cast<Eigen::Index>(3 * k)) = g[k];
    return v;
}

std::vector<Vec3> from_vec(const Eigen::VectorXd& v) {
    std::vector<Vec3> p(static_cast<std::size_t>(v.size() / 3));
    for (std::size_t k = 0; k < p.size(); ++k) p[k] = v.segment<3>(static_cast<Eigen::Index>(3 * k));
    return p;
}

SemiRegularMesh sphere_srm(const TriMesh& base) {
    SemiRegularMesh sr = subdivide(base, kModelLevel);
    for (auto& p : sr.fine_positions) p.normalize();
    return sr.with_positions(sr.fine_positions);
}

std::vector<double> apply_map(const SparseMap& m, const std::vector<double>& x) {
    std::vector<double> y(m.rows, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (int k = m.row_begin[r]; k < m.row_begin[r + 1]; ++k) y[r] += m.weight[k] * x[static_cast<std::size_t>(m.col[k])];
    }
    return y;
}

/// Template remeshed from frame 0, then transferred to every frame.
std::vector<SemiRegularMesh> remesh_sequence(const std::vector<TriMesh>& frames, const PipelineConfig& cfg) {
    const RemeshResult r = remesh(frames.front(), cfg);
    return transfer_frames(r.sr, frames.front(), frames);
}

/// Mean interior MSE of the network output over every patch of the given frames.
double patch_interior_mse(const Checkpoint& ckpt, const std::vector<SemiRegularMesh>& frames) {
    Autoencoder<float> net;
    const auto patches = frame_patches(frames, kModelPad);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t start = 0; start < patches.size(); start += 256) {
        const std::vector<PatchGrid> chunk(patches.begin() + static_cast<std::ptrdiff_t>(start),
                                           patches.begin() + static_cast<std::ptrdiff_t>(std::min(start + 256, patches.size())));
        const auto x = patches_to_batch<float>(chunk);
        const auto y = net.forward(x, ckpt.params.data());
        sum += static_cast<double>(nn::mse_interior(y, x, net.input_lattice()).loss) * static_cast<double>(chunk.size());
        n += chunk.size();
    }
    return sum / static_cast<double>(n);
}

double mean_frame_mse(const Checkpoint& ckpt, const std::vector<SemiRegularMesh>& frames) {
    double s = 0.0;
    for (const auto& r : reconstruct_sequence(ckpt, frames)) s += r.mse;
    return s / static_cast<double>(frames.size());
}

void progress(const EpochReport& e, int total) {
    if (e.epoch == 1 || e.epoch % 50 == 0 || e.epoch == total)
        std::cerr << "  epoch " << e.epoch << "/" << total << " loss " << e.loss << "\n";
}

// ---------------------------------------------------------------------------

Outcome architecture() {
    Autoencoder<float> net;
    const bool ok = net.param_count() == 18184 &&
                    net.layer_param_counts() == std::vector<std::size_t>{912, 3584, 2312, 2592, 3584, 4864, 336} &&
                    net.cell_counts() == std::vector<int>{111, 33, 6};
    std::ostringstream d;
    d << "params " << net.param_count() << ", layers";
    for (auto c : net.layer_param_counts()) d << " " << c;
    d << ", cells";
    for (auto c : net.cell_counts()) d << " " << c;
    return verdict(ok, d.str());
}

Outcome gradients() {
    constexpr int kInstances = 20;
    Rng rng(derive_seed(2, "acceptance"));
    const auto l32 = lattice(3, 2), l21 = lattice(2, 1), l10 = lattice(1, 0);
    double worst = 0.0;
    auto note = [&](const oracle::GradCheck& g) { worst = std::max({worst, g.input, g.params}); };

    for (int n = 0; n < kInstances; ++n) {
        for (auto [lat, in, out, radius] : {std::tuple{l21, 3, 4, 1}, std::tuple{l21, 4, 2, 1}, std::tuple{l32, 2, 3, 2},
                                            std::tuple{l32, 4, 2, 2}}) {
            nn::HexConv<double> conv(lat, in, out, radius);
            note(oracle::check_layer(conv, oracle::random_matrix(2 * lat->valid_count(), in, rng),
                                     oracle::random_params(conv.param_count(), rng), rng));
        }
        note(oracle::check_layer(*nn::make_pool<double>(*l32, *l21), oracle::random_matrix(2 * 111, 3, rng), {}, rng));
        note(oracle::check_layer(*nn::make_pool<double>(*l21, *l10), oracle::random_matrix(2 * 33, 3, rng), {}, rng));
        note(oracle::check_layer(*nn::make_unpool<double>(*l10, *l21), oracle::random_matrix(2 * 6, 3, rng), {}, rng));
        note(oracle::check_layer(*nn::make_unpool<double>(*l21, *l32), oracle::random_matrix(2 * 33, 3, rng), {}, rng));
        nn::Dense<double> dense(12, 5);
        note(oracle::check_layer(dense, oracle::random_matrix(4, 12, rng), oracle::random_params(dense.param_count(), rng), rng));
        nn::Relu<double> relu;
        note(oracle::check_layer(relu, oracle::random_away_from_zero(30, 4, rng), {}, rng));

        const DMatrix pred = oracle::random_matrix(2 * 111, 3, rng), target = oracle::random_matrix(2 * 111, 3, rng);
        auto f = [&](const Eigen::VectorXd& v) { return nn::mse_interior(oracle::unflat(v, pred.rows(), 3), target, *l32).loss; };
        worst = std::max(worst, oracle::rel_error(oracle::flat(nn::mse_interior(pred, target, *l32).grad),
                                                  oracle::numeric_gradient(f, oracle::flat(pred))));
    }

    const SemiRegularMesh patch = subdivide(shapes::single_triangle(), 3);
    const auto faces = patch.fine_faces();
    const Regularizers reg(patch.fine_positions.size(), faces);
    for (int n = 0; n < kInstances; ++n) {
        std::vector<Vec3> pos = patch.fine_positions;
        for (auto& p : pos) p += 0.05 * Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
        const Eigen::VectorXd x = to_vec(pos);
        auto check = [&](const LossGrad& g, const std::function<double(const std::vector<Vec3>&)>& f) {
            worst = std::max(worst, oracle::rel_error(to_vec(g.grad), oracle::numeric_gradient(
                                                                         [&](const Eigen::VectorXd& v) { return f(from_vec(v)); }, x)));
        };
        check(reg.edge_length(pos), [&](const auto& p) { return reg.edge_length(p).value; });
        check(reg.laplacian(pos), [&](const auto& p) { return reg.laplacian(p).value; });
        check(reg.normal_consistency(pos), [&](const auto& p) { return reg.normal_consistency(p).value; });

        const auto a = random_points(40, rng), b = random_points(30, rng);
        const ChamferResult c = chamfer_avg_with_grad(a, b);
        worst = std::max(worst, oracle::rel_error(to_vec(c.grad_a), oracle::numeric_gradient(
                                                                        [&](const Eigen::VectorXd& v) { return chamfer_avg(from_vec(v), b); },
                                                                        to_vec(a))));
    }
    return verdict(worst < 1e-4, "worst relative error " + fmt("%.3g", worst));
}

Outcome lattice_counts() {
    bool ok = true;
    int checked = 0;
    for (int l = 1; l <= 4; ++l) {
        for (int w = 0; w <= 2; ++w) {
            if (w > (1 << l) / 2) continue;  // pad wider than half an edge is rejected by construction
            ok &= padded_cell_count(l, w) == oracle::bfs_lattice_count(l, w);
            ok &= lattice(l, w)->valid_count() == padded_cell_count(l, w);
            ++checked;
        }
    }
    ok &= padded_cell_count(3, 2) == 111 && padded_cell_count(2, 1) == 33 && padded_cell_count(1, 0) == 6;
    return verdict(ok, std::to_string(checked) + " (level, pad) pairs; (3,2)=" + std::to_string(padded_cell_count(3, 2)) +
                           " (2,1)=" + std::to_string(padded_cell_count(2, 1)) + " (1,0)=" +
                           std::to_string(padded_cell_count(1, 0)));
}

Outcome oracles() {
    Rng rng(derive_seed(4, "acceptance"));
    bool chamfer_exact = true;
    for (int k = 0; k < 5; ++k) {
        const auto a = random_points(200, rng), b = random_points(200, rng);
        chamfer_exact &= chamfer_avg(a, b) == oracle::brute_chamfer(a, b);
    }

    Eigen::MatrixXd data(48, 16);
    for (Eigen::Index r = 0; r < 48; ++r)
        for (Eigen::Index c = 0; c < 16; ++c) data(r, c) = uniform(rng, -1, 1) * (1.0 + static_cast<double>(c));
    const PcaResult pca = pca_project(data, 2);
    const Eigen::RowVectorXd mean = data.colwise().mean();
    const Eigen::MatrixXd centred = data.rowwise() - mean;
    auto [vals, vecs] = oracle::jacobi_eigen(centred.transpose() * centred / 47.0);
    Eigen::MatrixXd comps = vecs.leftCols(2);
    for (int c = 0; c < 2; ++c) {
        Eigen::Index arg = 0;
        comps.col(c).cwiseAbs().maxCoeff(&arg);
        if (comps(arg, c) < 0) comps.col(c) *= -1.0;
    }
    const double pca_err = (pca.projection - centred * comps).cwiseAbs().maxCoeff();

    double conv_err = 0.0;
    for (auto [level, pad, in, out, radius] : {std::tuple{3, 2, 3, 16, 2}, std::tuple{2, 1, 16, 32, 1}, std::tuple{3, 2, 16, 3, 1}}) {
        const auto lat = lattice(level, pad);
        nn::HexConv<float> conv(lat, in, out, radius);
        const auto w = oracle::random_params(conv.param_count(), rng, 1.0);
        const std::vector<float> wf(w.begin(), w.end());
        std::vector<double> wd(wf.begin(), wf.end());
        const DMatrix x = oracle::random_matrix(lat->valid_count(), in, rng).cast<float>().cast<double>();
        const Eigen::VectorXd expect = oracle::dense_conv_operator(*lat, wd, in, out, radius) * oracle::flat(x);
        const nn::Matrix<float> y = conv.forward(x.cast<float>(), wf.data());
        const DMatrix yd = y.cast<double>();
        conv_err = std::max(conv_err, oracle::rel_error(oracle::flat(yd), expect));
    }
    return verdict(chamfer_exact && pca_err < 1e-8 && conv_err < 1e-6,
                   std::string("chamfer ") + (chamfer_exact ? "exact" : "MISMATCH") + ", pca " + fmt("%.3g", pca_err) +
                       ", hexconv " + fmt("%.3g", conv_err));
}

Outcome remesh_topology() {
    const TriMesh sphere = shapes::icosphere(3);
    const SimplifyResult s = simplify(sphere, 110, 0.01);
    const TopologyReport rep = topology_report(s.mesh);
    const SemiRegularMesh sr = subdivide(s.mesh, 3);
    const TriMesh fine = sr.fine_mesh();
    bool regular = true;
    for (std::size_t v = s.mesh.vertices.size(); v < fine.vertices.size(); ++v)
        regular &= vertex_degree(fine, static_cast<int>(v)) == 6;
    const bool ok = sphere.faces.size() == 1280 && s.mesh.faces.size() <= 110 && rep.euler_characteristic == 2 &&
                    rep.non_manifold_edges == 0 && fine.faces.size() == s.mesh.faces.size() * 64 && regular;
    return verdict(ok, std::to_string(s.mesh.faces.size()) + " base faces, euler " +
                           std::to_string(rep.euler_characteristic) + ", non-manifold " +
                           std::to_string(rep.non_manifold_edges) + ", fine faces " + std::to_string(fine.faces.size()) +
                           (regular ? ", regular" : ", IRREGULAR"));
}

Outcome fit_quality() {
    const TriMesh target = shapes::icosphere(5);
    FitConfig cfg;
    cfg.seed = 1;
    const FitResult r = fit_semiregular(subdivide(shapes::icosahedron(), 3), target, cfg);
    const double dense = surface_chamfer(r.mesh.fine_mesh(), target, 200000, 7);
    return verdict(dense < 1e-3, "chamfer " + fmt("%.3g", dense) + " at 200k samples (" + fmt("%.3g", r.final.chamfer) +
                                     " at " + std::to_string(cfg.samples) + ")");
}

struct TubeModel {
    std::vector<SemiRegularMesh> frames;
    std::size_t train_count = 0;
    Checkpoint ckpt;
    bool ready = false;
};

TubeModel& tube_model() {
    static TubeModel m;
    if (m.ready) return m;
    PipelineConfig cfg = parse_config("{}");
    apply_seed(cfg, 1);
    std::cerr << "  remeshing bent tube\n";
    m.frames = remesh_sequence(shapes::bending_tube_sequence({}, 48, 24, 1.2), cfg);
    m.train_count = static_cast<std::size_t>(0.75 * 48);
    const std::vector<SemiRegularMesh> train_frames(m.frames.begin(), m.frames.begin() + static_cast<std::ptrdiff_t>(m.train_count));
    TrainConfig tc = cfg.train;
    std::cerr << "  training on " << train_frames.size() << " frames, " << train_frames[0].base.faces.size() << " patches each\n";
    m.ckpt = train(frame_patches(train_frames, kModelPad), tc, [&](const EpochReport& e) { progress(e, tc.epochs); }).checkpoint;
    m.ready = true;
    return m;
}

Outcome end_to_end() {
    TubeModel& m = tube_model();
    const std::vector<SemiRegularMesh> test(m.frames.begin() + static_cast<std::ptrdiff_t>(m.train_count), m.frames.end());
    const double interior = patch_interior_mse(m.ckpt, test);
    const double vertex = mean_frame_mse(m.ckpt, test);
    return verdict(interior < 1e-3, std::to_string(m.frames[0].base.faces.size()) + " base faces, held-out interior MSE " +
                                        fmt("%.3g", interior) + " (assembled vertex MSE " + fmt("%.3g", vertex) + ")");
}

Outcome transfer_path() {
    TubeModel& m = tube_model();
    PipelineConfig cfg = parse_config("{}");
    apply_seed(cfg, 2);
    const auto torus = remesh_sequence(shapes::torus_segment_sequence({}, 12, 12), cfg);
    std::vector<SemiRegularMesh> all(m.frames.begin() + static_cast<std::ptrdiff_t>(m.train_count), m.frames.end());
    std::vector<std::string> classes(all.size(), "tube");
    all.insert(all.end(), torus.begin(), torus.end());
    classes.resize(all.size(), "torus");
    std::vector<double> mse;
    for (const auto& r : reconstruct_sequence(m.ckpt, all)) mse.push_back(r.mse);
    bool ok = true;
    std::ostringstream d;
    for (const auto& c : summarize_by_class(classes, mse)) {
        ok &= std::isfinite(c.mean) && std::isfinite(c.stddev);
        d << c.name << " " << c.frames << " frames " << fmt("%.3g", c.mean) << " +- " << fmt("%.2g", c.stddev) << "; ";
    }
    std::string text = d.str();
    if (text.size() >= 2) text.resize(text.size() - 2);
    return verdict(ok, text);
}

Outcome invariants() {
    std::vector<std::string> failed;
    const SemiRegularMesh sr = sphere_srm(shapes::icosahedron());
    const PatchLayout layout = build_layout(sr, kModelPad);
    const auto grids = extract_patches(layout, sr.fine_positions);

    bool rot = true, mse_rot = true;
    for (std::size_t f = 0; f < grids.size(); ++f) {
        rot &= rotate_patch(rotate_patch(rotate_patch(grids[f], 1), 1), 1).data == grids[f].data;
        if (f + 1 < grids.size()) {
            const double base = patch_mse(grids[f], grids[f + 1]);
            for (int k = 1; k < 3; ++k)
                mse_rot &= std::abs(patch_mse(rotate_patch(grids[f], k), rotate_patch(grids[f + 1], k)) - base) <= 1e-13 * base;
        }
    }
    if (!rot) failed.push_back("rotation");
    if (!mse_rot) failed.push_back("mse rotation");

    double assemble = 0.0;
    const auto back = assemble_positions(grids, layout);
    for (std::size_t v = 0; v < back.size(); ++v) assemble = std::max(assemble, (back[v] - sr.fine_positions[v]).norm());
    if (assemble > 1e-12) failed.push_back("extract/assemble");

    bool pool_ok = true;
    for (auto [lc, wc, lf, wf] : {std::array{1, 0, 2, 1}, std::array{2, 1, 3, 2}}) {
        const auto coarse = lattice(lc, wc), fine = lattice(lf, wf);
        const std::vector<double> fc(static_cast<std::size_t>(fine->valid_count()), -0.75);
        for (double v : apply_map(pool_map(*fine, *coarse), fc)) pool_ok &= std::abs(v + 0.75) <= 1e-15;
        const std::vector<double> cc(static_cast<std::size_t>(coarse->valid_count()), -0.75);
        const auto up = apply_map(unpool_map(*coarse, *fine), cc);
        for (int c = 0; c < fine->valid_count(); ++c)
            if (fine->interior(c)) pool_ok &= std::abs(up[static_cast<std::size_t>(c)] + 0.75) <= 1e-15;
    }
    if (!pool_ok) failed.push_back("pool/unpool");

    TrainConfig tc;
    tc.epochs = 3;
    tc.batch_size = 16;
    tc.seed = 3;
    const TrainResult a = train(grids, tc), b = train(grids, tc);
    if (a.checkpoint.params != b.checkpoint.params || a.loss_history != b.loss_history) failed.push_back("training determinism");

    const fs::path p1 = fs::temp_directory_path() / "srae_acceptance_a.ckpt", p2 = fs::temp_directory_path() / "srae_acceptance_b.ckpt";
    save_checkpoint(a.checkpoint, p1);
    save_checkpoint(load_checkpoint(p1), p2);
    auto bytes = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    if (bytes(p1) != bytes(p2) || load_checkpoint(p1).params != a.checkpoint.params) failed.push_back("checkpoint round trip");

    std::string d = "rotation, assembly, pool/unpool, mse rotation, checkpoint, determinism";
    if (!failed.empty()) {
        d = "failed:";
        for (const auto& f : failed) d += " " + f;
    }
    return verdict(failed.empty(), d);
}

std::vector<TriMesh> load_dir(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto ext = e.path().extension();
        if (ext == ".obj" || ext == ".off") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<TriMesh> out;
    for (const auto& f : files) out.push_back(load_mesh(f));
    return out;
}

Outcome gallop() {
    const char* env = std::getenv("SRAE_GALLOP_DIR");
    if (!env || !fs::is_directory(fs::path(env) / "horse") || !fs::is_directory(fs::path(env) / "camel"))
        return {Outcome::Skip, "SRAE_GALLOP_DIR with horse/ and camel/ not present"};
    PipelineConfig cfg = parse_config("{}");
    apply_seed(cfg, 1);
    std::vector<PatchGrid> train_patches;
    std::vector<std::pair<std::string, std::vector<SemiRegularMesh>>> tests;
    for (const char* name : {"horse", "camel"}) {
        std::cerr << "  remeshing " << name << "\n";
        const auto frames = remesh_sequence(load_dir(fs::path(env) / name), cfg);
        const std::size_t n_train = static_cast<std::size_t>(cfg.train.train_fraction * static_cast<double>(frames.size()));
        const auto p = frame_patches({frames.begin(), frames.begin() + static_cast<std::ptrdiff_t>(n_train)}, kModelPad);
        train_patches.insert(train_patches.end(), p.begin(), p.end());
        tests.emplace_back(name, std::vector<SemiRegularMesh>(frames.begin() + static_cast<std::ptrdiff_t>(n_train), frames.end()));
    }
    const Checkpoint ckpt =
        train(train_patches, cfg.train, [&](const EpochReport& e) { progress(e, cfg.train.epochs); }).checkpoint;
    bool ok = true;
    std::ostringstream d;
    for (const auto& [name, frames] : tests) {
        const double mse = mean_frame_mse(ckpt, frames);
        ok &= mse < 2.0 * 2.0e-4;
        d << name << " test MSE " << fmt("%.3g", mse) << "; ";
    }
    std::string text = d.str();
    text.resize(text.size() - 2);
    return verdict(ok, text);
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int a = 1; a < argc; ++a) {
        if (std::string(argv[a]) == "--only" && a + 1 < argc) {
            std::stringstream s(argv[++a]);
            for (std::string t; std::getline(s, t, ',');) only.insert(std::stoi(t));
        }
    }
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"architecture", architecture},   {"gradient suite", gradients},      {"lattice counts", lattice_counts},
        {"oracle equivalences", oracles}, {"remesh topology", remesh_topology}, {"fit quality", fit_quality},
        {"end-to-end tube", end_to_end},  {"transfer path", transfer_path},   {"invariants", invariants},
        {"dataset reproduction", gallop},
    };
    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k) + 1;
        if (!only.empty() && !only.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {Outcome::Fail, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const char* tag = o.kind == Outcome::Pass ? "PASS" : o.kind == Outcome::Skip ? "SKIP" : "FAIL";
        if (o.kind == Outcome::Fail) ++failures;
        std::cout << "criterion " << id << " " << tag << " " << criteria[k].first << ": " << o.detail << " ("
                  << fmt("%.1f", secs) << " s)" << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
