// srae: semi-regular remeshing and patch autoencoder command-line tool.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "srae/errors.hpp"
#include "srae/patch.hpp"
#include "srae/pipeline.hpp"
#include "srae/shapes.hpp"

namespace fs = std::filesystem;
using namespace srae;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
};

PipelineConfig resolve_config(const Common& c) {
    PipelineConfig cfg = c.config.empty() ? PipelineConfig{} : load_config(c.config);
    if (c.seed) apply_seed(cfg, *c.seed);
    else apply_seed(cfg, cfg.seed);
    return cfg;
}

std::vector<fs::path> expand_all(const std::vector<std::string>& patterns) {
    std::vector<fs::path> out;
    for (const auto& p : patterns) {
        const auto m = expand_glob(p);
        out.insert(out.end(), m.begin(), m.end());
    }
    if (out.empty()) throw ValidationError("no input files matched");
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<SemiRegularMesh> load_frames(const std::vector<fs::path>& paths) {
    std::vector<SemiRegularMesh> frames;
    frames.reserve(paths.size());
    for (const auto& p : paths) {
        frames.push_back(load_srm(p));
        if (frames.back().level != frames.front().level) {
            throw ValidationError("mixed subdivision levels: " + p.string() + " has level " +
                                  std::to_string(frames.back().level) + ", expected " +
                                  std::to_string(frames.front().level));
        }
    }
    return frames;
}

void print_report(const char* label, const TopologyReport& r) {
    std::printf("%s: boundary_edges=%zu non_manifold_edges=%zu euler=%ld\n", label, r.boundary_edges,
                r.non_manifold_edges, r.euler_characteristic);
}

int cmd_remesh(const std::string& in, const std::string& out, const Common& common, bool force) {
    const PipelineConfig cfg = resolve_config(common);
    const TriMesh mesh = load_mesh(in);
    const TopologyReport rep = topology_report(mesh);
    print_report("input", rep);
    if (rep.non_manifold_edges > 0 && !force) {
        std::fprintf(stderr, "error: input has %zu non-manifold edges (use --force to proceed)\n", rep.non_manifold_edges);
        return kData;
    }
    const RemeshResult r = remesh(mesh, cfg);
    print_report("base", r.base_report);
    if (!r.reached_target) std::fprintf(stderr, "warning: simplification stopped above the target face count\n");
    save_srm(r.sr, out);
    std::printf("base_faces=%zu level=%d fine_vertices=%zu\n", r.sr.base.faces.size(), r.sr.level,
                r.sr.fine_positions.size());
    std::printf("chamfer initial=%.6e final=%.6e (loss %.6e -> %.6e)\n", r.initial.chamfer, r.final.chamfer,
                r.initial.total, r.final.total);
    return kOk;
}

std::vector<fs::path> mesh_files(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto ext = e.path().extension().string();
        if (e.is_regular_file() && (ext == ".obj" || ext == ".off")) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

int cmd_transfer(const std::string& tmpl_path, const std::string& frames_dir, const std::string& out_dir,
                 const std::string& template_mesh) {
    const SemiRegularMesh tmpl = load_srm(tmpl_path);
    if (!fs::is_directory(frames_dir)) throw IoError("not a directory: " + frames_dir);
    const auto files = mesh_files(frames_dir);
    if (files.empty()) throw ValidationError("no .obj/.off frames in " + frames_dir);
    const TriMesh base_mesh = load_mesh(template_mesh.empty() ? files.front() : fs::path(template_mesh));
    const BarycentricParam param = project_parametrize(tmpl, base_mesh);
    fs::create_directories(out_dir);
    for (const auto& f : files) {
        const TriMesh frame = load_mesh(f);
        std::vector<Vec3> pos;
        try {
            pos = apply_parametrization(param, frame);
        } catch (const ValidationError& e) {
            throw ValidationError(f.string() + ": " + e.what());
        }
        save_srm(tmpl.with_positions(std::move(pos)), fs::path(out_dir) / (f.stem().string() + ".srm"));
    }
    std::printf("wrote %zu frames to %s\n", files.size(), out_dir.c_str());
    return kOk;
}

int cmd_train(const std::vector<std::string>& inputs, const Common& common, const std::string& out,
              const std::string& loss_csv, bool all_frames) {
    const PipelineConfig cfg = resolve_config(common);
    const auto paths = expand_all(inputs);
    const auto split = all_frames ? FrameSplit{paths, {}} : split_frames(paths, cfg.train.train_fraction);
    const auto frames = load_frames(split.train);
    if (frames.front().level != kModelLevel) {
        throw ValidationError("the model needs level-" + std::to_string(kModelLevel) + " meshes");
    }
    const auto patches = frame_patches(frames, kModelPad);
    std::printf("training on %zu frames (%zu patches), %zu held out\n", frames.size(), patches.size(), split.test.size());
    std::ofstream csv;
    if (!loss_csv.empty()) {
        csv.open(loss_csv);
        if (!csv) throw IoError("cannot write " + loss_csv);
        csv << "epoch,loss\n";
    }
    const TrainResult res = train(patches, cfg.train, [&](const EpochReport& r) {
        if (csv.is_open()) csv << r.epoch << ',' << r.loss << '\n';
        if (r.epoch == 1 || r.epoch % 10 == 0 || r.epoch == cfg.train.epochs) {
            std::printf("epoch %d/%d loss %.6e\n", r.epoch, cfg.train.epochs, r.loss);
            std::fflush(stdout);
        }
    });
    save_checkpoint(res.checkpoint, out);
    std::printf("saved %s\n", out.c_str());
    return kOk;
}

void write_face_csv(const fs::path& path, const std::vector<double>& err) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "face,error\n";
    out.precision(9);
    for (std::size_t f = 0; f < err.size(); ++f) out << f << ',' << err[f] << '\n';
}

int cmd_reconstruct(const std::string& ckpt_path, const std::vector<std::string>& inputs, const std::string& out_dir) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const auto paths = expand_all(inputs);
    const auto frames = load_frames(paths);
    const auto rec = reconstruct_sequence(ckpt, frames);
    fs::create_directories(out_dir);
    std::ofstream table(fs::path(out_dir) / "mse.csv");
    table << "path,class,mse\n";
    table.precision(9);
    for (std::size_t k = 0; k < paths.size(); ++k) {
        const std::string stem = paths[k].stem().string();
        save_mesh(rec[k].mesh.fine_mesh(), fs::path(out_dir) / (stem + ".obj"));
        write_face_csv(fs::path(out_dir) / (stem + "_face_error.csv"), rec[k].face_error);
        table << paths[k].string() << ',' << frame_class(paths[k]) << ',' << rec[k].mse << '\n';
        std::printf("%s mse %.6e\n", paths[k].string().c_str(), rec[k].mse);
    }
    return kOk;
}

int cmd_embed(const std::string& ckpt_path, const std::vector<std::string>& inputs, const std::string& out) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const auto frames = load_frames(expand_all(inputs));
    const Embedding e = concat_latents(ckpt, frames, 2);
    std::ofstream csv(out);
    if (!csv) throw IoError("cannot write " + out);
    const Eigen::Index width = e.latents.cols();
    for (Eigen::Index c = 0; c < width; ++c) csv << "p" << c / kLatentDim << "_z" << c % kLatentDim << ',';
    csv << "pc1,pc2\n";
    csv.precision(9);
    for (Eigen::Index r = 0; r < e.latents.rows(); ++r) {
        for (Eigen::Index c = 0; c < width; ++c) csv << e.latents(r, c) << ',';
        csv << e.pca.projection(r, 0) << ',' << e.pca.projection(r, 1) << '\n';
    }
    std::printf("wrote %ld x %ld embedding; explained variance %.4f %.4f\n", static_cast<long>(e.latents.rows()),
                static_cast<long>(width + 2), e.pca.explained_variance_ratio[0], e.pca.explained_variance_ratio[1]);
    return kOk;
}

int cmd_eval(const std::string& ckpt_path, const std::vector<std::string>& inputs, const std::string& split_name,
             double fraction) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    auto paths = expand_all(inputs);
    if (split_name != "all") {
        const FrameSplit s = split_frames(paths, fraction);
        paths = split_name == "train" ? s.train : s.test;
        if (paths.empty()) throw ValidationError("split '" + split_name + "' selects no frames");
    }
    const auto frames = load_frames(paths);
    const auto rec = reconstruct_sequence(ckpt, frames);
    std::vector<std::string> classes;
    std::vector<double> mse;
    for (std::size_t k = 0; k < paths.size(); ++k) {
        classes.push_back(frame_class(paths[k]));
        mse.push_back(rec[k].mse);
    }
    std::printf("%-20s %8s %28s\n", "class", "frames", "MSE (mean +- std)");
    for (const auto& c : summarize_by_class(classes, mse)) {
        std::printf("%-20s %8zu %13.8f +- %.8f\n", c.name.c_str(), c.frames, c.mean, c.stddev);
    }
    return kOk;
}

int cmd_synth(const std::string& kind, const std::string& out_dir, int frames, int period) {
    std::vector<TriMesh> seq;
    if (kind == "tube") seq = shapes::bending_tube_sequence({}, frames, period, 1.2);
    else if (kind == "torus") seq = shapes::torus_segment_sequence({}, frames, period);
    else if (kind == "sphere") seq = {shapes::icosphere(4)};
    else throw ValidationError("unknown synthetic kind '" + kind + "' (tube, torus, sphere)");
    fs::create_directories(out_dir);
    for (std::size_t k = 0; k < seq.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%03zu.obj", k);
        save_mesh(seq[k], fs::path(out_dir) / name);
    }
    std::printf("wrote %zu frames to %s\n", seq.size(), out_dir.c_str());
    return kOk;
}

int cmd_extract(const std::vector<std::string>& inputs, const std::string& out, int pad) {
    const auto frames = load_frames(expand_all(inputs));
    const auto patches = frame_patches(frames, pad);
    save_patch_dataset(patches, out);
    std::printf("wrote %zu patches to %s\n", patches.size(), out.c_str());
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semi-regular remeshing and hexagonal patch autoencoder"};
    app.require_subcommand(1);
    Common common;
    auto add_common = [&](CLI::App* sub, bool with_config) {
        if (with_config) sub->add_option("--config", common.config, "JSON pipeline config")->check(CLI::ExistingFile);
        sub->add_option("--seed", common.seed, "Override the config seed");
    };

    std::string in, out, tmpl, frames_dir, out_dir, template_mesh, ckpt, loss_csv, split = "all", kind;
    std::vector<std::string> inputs;
    bool force = false, all_frames = false;
    int frames = 48, period = 24, pad = kModelPad;
    double fraction = 0.75;

    auto* remesh = app.add_subcommand("remesh", "Simplify, subdivide and fit a mesh; write .srm");
    remesh->add_option("input", in, "Input .obj/.off")->required();
    remesh->add_option("output", out, "Output .srm")->required();
    remesh->add_flag("--force", force, "Proceed on non-manifold input");
    add_common(remesh, true);

    auto* transfer = app.add_subcommand("transfer", "Transfer a fitted .srm to every frame of a sequence");
    transfer->add_option("template", tmpl, "Template .srm")->required();
    transfer->add_option("frames_dir", frames_dir, "Directory of .obj/.off frames")->required();
    transfer->add_option("out_dir", out_dir, "Output directory")->required();
    transfer->add_option("--template-mesh", template_mesh, "Mesh the template was fitted to (default: first frame)");

    auto* trn = app.add_subcommand("train", "Train the autoencoder on .srm frames");
    trn->add_option("inputs", inputs, ".srm files or glob patterns")->required();
    trn->add_option("--out", out, "Checkpoint path")->required();
    trn->add_option("--loss-csv", loss_csv, "Write per-epoch loss CSV");
    trn->add_flag("--all-frames", all_frames, "Train on every frame instead of the per-class split");
    add_common(trn, true);

    auto* rec = app.add_subcommand("reconstruct", "Reconstruct frames and write meshes and error maps");
    rec->add_option("checkpoint", ckpt)->required();
    rec->add_option("inputs", inputs, ".srm files or glob patterns")->required();
    rec->add_option("--out", out_dir, "Output directory")->required();

    auto* emb = app.add_subcommand("embed", "Write concatenated patch latents and their 2D PCA");
    emb->add_option("checkpoint", ckpt)->required();
    emb->add_option("inputs", inputs, ".srm files or glob patterns")->required();
    emb->add_option("--out", out, "CSV path")->required();

    auto* ev = app.add_subcommand("eval", "Per-class reconstruction MSE table");
    ev->add_option("checkpoint", ckpt)->required();
    ev->add_option("inputs", inputs, ".srm files or glob patterns")->required();
    ev->add_option("--split", split, "all, train or test")->check(CLI::IsMember({"all", "train", "test"}));
    ev->add_option("--train-fraction", fraction, "Per-class train fraction for --split");
    add_common(ev, false);

    auto* syn = app.add_subcommand("synth", "Write a synthetic mesh sequence");
    syn->add_option("kind", kind, "tube, torus or sphere")->required();
    syn->add_option("out_dir", out_dir)->required();
    syn->add_option("--frames", frames)->check(CLI::PositiveNumber);
    syn->add_option("--period", period)->check(CLI::PositiveNumber);

    auto* ext = app.add_subcommand("extract", "Write the padded patches of .srm frames to a binary dataset");
    ext->add_option("inputs", inputs, ".srm files or glob patterns")->required();
    ext->add_option("--out", out, "Dataset path")->required();
    ext->add_option("--pad", pad, "Pad width");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*remesh) return cmd_remesh(in, out, common, force);
        if (*transfer) return cmd_transfer(tmpl, frames_dir, out_dir, template_mesh);
        if (*trn) return cmd_train(inputs, common, out, loss_csv, all_frames);
        if (*rec) return cmd_reconstruct(ckpt, inputs, out_dir);
        if (*emb) return cmd_embed(ckpt, inputs, out);
        if (*ev) return cmd_eval(ckpt, inputs, split, fraction);
        if (*syn) return cmd_synth(kind, out_dir, frames, period);
        if (*ext) return cmd_extract(inputs, out, pad);
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return kNumeric;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kData;
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kData;
    }
    return kUsage;
}
