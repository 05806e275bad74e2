#pragma once

// End-to-end helpers shared by the command-line tool and the acceptance runner.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "srae/model.hpp"
#include "srae/remesh.hpp"

namespace srae {

struct PipelineConfig {
    std::size_t target_base_faces = 110;
    int level = 3;
    int pad_width = 2;
    double lambda_edge = 0.01;
    FitConfig fit;
    TrainConfig train;
    std::uint64_t seed = 0;
};

/// Parses a JSON config; unknown keys and out-of-range values raise ValidationError.
PipelineConfig parse_config(const std::string& json_text);
PipelineConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const PipelineConfig& cfg);
/// Sets the top-level seed and the derived fit/train seeds.
void apply_seed(PipelineConfig& cfg, std::uint64_t seed);

struct RemeshResult {
    SemiRegularMesh sr;
    TopologyReport input_report;
    TopologyReport base_report;
    bool reached_target = true;
    FitTerms initial;
    FitTerms final;
};

/// simplify -> subdivide -> fit against the input surface.
RemeshResult remesh(const TriMesh& input, const PipelineConfig& cfg);

/// Fine positions of `tmpl` re-expressed on every frame through barycentric coordinates on
/// `template_mesh`. Frames must share the template mesh topology.
std::vector<SemiRegularMesh> transfer_frames(const SemiRegularMesh& tmpl, const TriMesh& template_mesh,
                                             const std::vector<TriMesh>& frames);

/// Paths matching a pattern (`*`, `?`, `[...]` in any component), sorted. A plain existing path
/// matches itself.
std::vector<std::filesystem::path> expand_glob(const std::string& pattern);

/// Class of a frame: the name of its parent directory.
std::string frame_class(const std::filesystem::path& path);

/// Per class, sorted by path: the first floor(fraction * n) frames (at least 1) train, the rest
/// test.
struct FrameSplit {
    std::vector<std::filesystem::path> train, test;
};
FrameSplit split_frames(const std::vector<std::filesystem::path>& paths, double train_fraction);

/// Normalized, padded patches of every frame (no augmentation).
std::vector<PatchGrid> frame_patches(const std::vector<SemiRegularMesh>& frames, int pad_width);

struct ClassError {
    std::string name;
    std::size_t frames = 0;
    double mean = 0.0;
    double stddev = 0.0;  // population standard deviation over frames
};
std::vector<ClassError> summarize_by_class(const std::vector<std::string>& classes, const std::vector<double>& mse);

}  // namespace srae
