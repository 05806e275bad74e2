#include "srae/pipeline.hpp"

#include <glob.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "srae/errors.hpp"
#include "srae/patch.hpp"

namespace srae {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ValidationError(where + " must be a JSON object");
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.count(key)) throw ValidationError("unknown config key '" + where + key + "'");
    }
}

template <class V>
void read(const json& obj, const char* key, V& out, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<V>();
    } catch (const json::exception&) {
        throw ValidationError("config key '" + where + key + "' has the wrong type");
    }
}

}  // namespace

PipelineConfig parse_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    reject_unknown(doc, {"target_base_faces", "level", "pad_width", "lambda_edge", "fit", "train", "seed"}, "");
    PipelineConfig cfg;
    read(doc, "target_base_faces", cfg.target_base_faces, "");
    read(doc, "level", cfg.level, "");
    read(doc, "pad_width", cfg.pad_width, "");
    read(doc, "lambda_edge", cfg.lambda_edge, "");
    std::uint64_t seed = 0;
    read(doc, "seed", seed, "");
    if (doc.contains("fit")) {
        const json& f = doc["fit"];
        reject_unknown(f, {"samples", "steps", "learning_rate", "momentum", "w_chamfer", "w_edge", "w_normal",
                           "w_laplacian", "resample"},
                       "fit.");
        read(f, "samples", cfg.fit.samples, "fit.");
        read(f, "steps", cfg.fit.steps, "fit.");
        read(f, "learning_rate", cfg.fit.learning_rate, "fit.");
        read(f, "momentum", cfg.fit.momentum, "fit.");
        read(f, "w_chamfer", cfg.fit.w_chamfer, "fit.");
        read(f, "w_edge", cfg.fit.w_edge, "fit.");
        read(f, "w_normal", cfg.fit.w_normal, "fit.");
        read(f, "w_laplacian", cfg.fit.w_laplacian, "fit.");
        read(f, "resample", cfg.fit.resample, "fit.");
    }
    if (doc.contains("train")) {
        const json& t = doc["train"];
        reject_unknown(t, {"epochs", "batch_size", "learning_rate", "augment", "train_fraction"}, "train.");
        read(t, "epochs", cfg.train.epochs, "train.");
        read(t, "batch_size", cfg.train.batch_size, "train.");
        read(t, "learning_rate", cfg.train.learning_rate, "train.");
        read(t, "augment", cfg.train.augment, "train.");
        read(t, "train_fraction", cfg.train.train_fraction, "train.");
    }
    if (cfg.target_base_faces < 1) throw ValidationError("target_base_faces must be >= 1");
    if (cfg.level < 1 || cfg.level > 6) throw ValidationError("level must be in [1,6]");
    if (cfg.pad_width < 0 || cfg.pad_width > (1 << (cfg.level - 1))) throw ValidationError("pad_width too large for level");
    if (cfg.lambda_edge < 0) throw ValidationError("lambda_edge must be >= 0");
    validate(cfg.fit);
    validate(cfg.train);
    apply_seed(cfg, seed);
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::stringstream s;
    s << in.rdbuf();
    return parse_config(s.str());
}

std::string config_to_json(const PipelineConfig& cfg) {
    json doc;
    doc["target_base_faces"] = cfg.target_base_faces;
    doc["level"] = cfg.level;
    doc["pad_width"] = cfg.pad_width;
    doc["lambda_edge"] = cfg.lambda_edge;
    doc["seed"] = cfg.seed;
    doc["fit"] = {{"samples", cfg.fit.samples},         {"steps", cfg.fit.steps},
                  {"learning_rate", cfg.fit.learning_rate}, {"momentum", cfg.fit.momentum},
                  {"w_chamfer", cfg.fit.w_chamfer},     {"w_edge", cfg.fit.w_edge},
                  {"w_normal", cfg.fit.w_normal},       {"w_laplacian", cfg.fit.w_laplacian},
                  {"resample", cfg.fit.resample}};
    doc["train"] = {{"epochs", cfg.train.epochs},
                    {"batch_size", cfg.train.batch_size},
                    {"learning_rate", cfg.train.learning_rate},
                    {"augment", cfg.train.augment},
                    {"train_fraction", cfg.train.train_fraction}};
    return doc.dump(2);
}

void apply_seed(PipelineConfig& cfg, std::uint64_t seed) {
    cfg.seed = seed;
    cfg.fit.seed = derive_seed(seed, "fit");
    cfg.train.seed = derive_seed(seed, "train");
}

RemeshResult remesh(const TriMesh& input, const PipelineConfig& cfg) {
    validate(input);
    RemeshResult r;
    r.input_report = topology_report(input);
    const SimplifyResult simp = simplify(input, cfg.target_base_faces, cfg.lambda_edge);
    r.reached_target = simp.reached_target;
    r.base_report = topology_report(simp.mesh);
    const SemiRegularMesh sr = subdivide(simp.mesh, cfg.level);
    FitResult fit = fit_semiregular(sr, input, cfg.fit);
    r.initial = fit.initial;
    r.final = fit.final;
    r.sr = std::move(fit.mesh);
    return r;
}

std::vector<SemiRegularMesh> transfer_frames(const SemiRegularMesh& tmpl, const TriMesh& template_mesh,
                                             const std::vector<TriMesh>& frames) {
    const BarycentricParam param = project_parametrize(tmpl, template_mesh);
    std::vector<SemiRegularMesh> out;
    out.reserve(frames.size());
    for (std::size_t k = 0; k < frames.size(); ++k) {
        try {
            out.push_back(tmpl.with_positions(apply_parametrization(param, frames[k])));
        } catch (const ValidationError& e) {
            throw ValidationError("frame " + std::to_string(k) + ": " + e.what());
        }
    }
    return out;
}

std::vector<std::filesystem::path> expand_glob(const std::string& pattern) {
    if (pattern.find_first_of("*?[") == std::string::npos) {
        if (!std::filesystem::exists(pattern)) throw IoError("no such file: " + pattern);
        return {pattern};
    }
    glob_t g{};
    const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
    std::vector<std::filesystem::path> out;
    if (rc == 0) {
        for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
    }
    globfree(&g);
    if (rc != 0 && rc != GLOB_NOMATCH) throw IoError("cannot expand pattern " + pattern);
    std::sort(out.begin(), out.end());
    return out;
}

std::string frame_class(const std::filesystem::path& path) {
    const auto parent = std::filesystem::absolute(path).parent_path().filename().string();
    return parent.empty() ? "default" : parent;
}

FrameSplit split_frames(const std::vector<std::filesystem::path>& paths, double train_fraction) {
    std::map<std::string, std::vector<std::filesystem::path>> groups;
    for (const auto& p : paths) groups[frame_class(p)].push_back(p);
    FrameSplit s;
    for (auto& [name, list] : groups) {
        std::sort(list.begin(), list.end());
        std::size_t n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(list.size()) + 1e-9));
        n_train = std::clamp<std::size_t>(n_train, 1, list.size());
        s.train.insert(s.train.end(), list.begin(), list.begin() + static_cast<std::ptrdiff_t>(n_train));
        s.test.insert(s.test.end(), list.begin() + static_cast<std::ptrdiff_t>(n_train), list.end());
    }
    return s;
}

std::vector<PatchGrid> frame_patches(const std::vector<SemiRegularMesh>& frames, int pad_width) {
    std::vector<PatchGrid> out;
    const SemiRegularMesh* prev = nullptr;
    PatchLayout layout;
    for (const auto& sr : frames) {
        if (!prev || prev->base.faces != sr.base.faces || prev->level != sr.level ||
            prev->patch_grids != sr.patch_grids) {
            layout = build_layout(sr, pad_width);
            prev = &sr;
        }
        const auto [pos, tf] = normalized_positions(sr);
        auto patches = extract_patches(layout, pos);
        out.insert(out.end(), std::make_move_iterator(patches.begin()), std::make_move_iterator(patches.end()));
    }
    return out;
}

std::vector<ClassError> summarize_by_class(const std::vector<std::string>& classes, const std::vector<double>& mse) {
    if (classes.size() != mse.size()) throw ValidationError("class and error lists differ in length");
    std::map<std::string, std::vector<double>> groups;
    for (std::size_t k = 0; k < mse.size(); ++k) groups[classes[k]].push_back(mse[k]);
    std::vector<ClassError> out;
    for (const auto& [name, v] : groups) {
        ClassError e;
        e.name = name;
        e.frames = v.size();
        for (double x : v) e.mean += x;
        e.mean /= static_cast<double>(v.size());
        for (double x : v) e.stddev += (x - e.mean) * (x - e.mean);
        e.stddev = std::sqrt(e.stddev / static_cast<double>(v.size()));
        out.push_back(e);
    }
    return out;
}

}  // namespace srae
