#pragma once

// Patch autoencoder: architecture, training, reconstruction, embeddings and checkpoints.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "srae/hexnn.hpp"
#include "srae/patch.hpp"
#include "srae/remesh.hpp"

namespace srae {

inline constexpr int kModelLevel = 3;
inline constexpr int kModelPad = 2;
inline constexpr int kLatentDim = 8;

/// HexConv(3->16,r2) ReLU Pool HexConv(16->32,r1) ReLU Pool Dense(288->8) |
/// Dense(8->288) Unpool HexConv(32->16,r1) ReLU Unpool HexConv(16->16,r2) ReLU HexConv(16->3,r1)
template <class T>
class Autoencoder {
public:
    Autoencoder();

    std::size_t param_count() const { return net_.param_count(); }
    /// Parameter counts of the layers that have parameters, in order.
    std::vector<std::size_t> layer_param_counts() const;
    std::string describe() const { return net_.describe(); }
    std::string fingerprint() const;
    std::vector<T> init_params(std::uint64_t seed) const { return net_.init_params(seed); }

    const LatticeLayout& input_lattice() const { return *lat_[0]; }
    /// Valid cell counts at the input, after each pooling step and at the output.
    std::vector<int> cell_counts() const;

    nn::Matrix<T> encode(const nn::Matrix<T>& x, const T* params) { return net_.forward(x, params, 0, kEncoderEnd); }
    nn::Matrix<T> decode(const nn::Matrix<T>& z, const T* params) { return net_.forward(z, params, kEncoderEnd, net_.size()); }
    nn::Matrix<T> forward(const nn::Matrix<T>& x, const T* params) { return net_.forward(x, params, 0, net_.size()); }
    nn::Matrix<T> backward(const nn::Matrix<T>& dy, const T* params, T* grad) {
        return net_.backward(dy, params, grad, 0, net_.size());
    }

    nn::Sequential<T>& net() { return net_; }

    static constexpr std::size_t kEncoderEnd = 8;

private:
    std::array<std::shared_ptr<const LatticeLayout>, 3> lat_;
    nn::Sequential<T> net_;
};

extern template class Autoencoder<float>;
extern template class Autoencoder<double>;

/// Stack patches (first 3 channels of every valid cell) into a network batch.
template <class T>
nn::Matrix<T> patches_to_batch(std::span<const PatchGrid> patches);
/// Write network output rows back into grids shaped like `like` (patch means are kept).
std::vector<PatchGrid> batch_to_patches(const nn::Matrix<float>& batch, std::span<const PatchGrid> like);

// ---------------------------------------------------------------------------

struct TrainConfig {
    int epochs = 500;
    int batch_size = 100;
    double learning_rate = 1e-3;
    bool augment = true;
    std::uint64_t seed = 0;
    double train_fraction = 0.75;  // per-sequence frame split used by the CLI
};

void validate(const TrainConfig& cfg);

struct Checkpoint {
    int version = 1;
    std::string fingerprint;
    std::vector<float> params;
    std::optional<nn::AdamState<float>> optimizer;
    int epoch = 0;
    std::vector<double> loss_history;
};

struct EpochReport {
    int epoch;
    double loss;
    std::size_t batches;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<double> loss_history;  // per-epoch mean interior MSE
    std::size_t batches_per_epoch = 0;
};

/// Minibatch Adam on interior MSE. Augmentation adds the 120 and 240 degree rotations of every
/// patch as separate dataset entries. Throws NumericalError on a non-finite loss.
TrainResult train(std::span<const PatchGrid> dataset, const TrainConfig& cfg,
                  const std::function<void(const EpochReport&)>& on_epoch = {});

Checkpoint new_checkpoint(std::uint64_t seed);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
/// Verifies version and fingerprint against `expected_fingerprint` (default: this build's
/// architecture).
Checkpoint load_checkpoint(const std::filesystem::path& path, const std::string& expected_fingerprint = "");

// ---------------------------------------------------------------------------

/// Fine positions mapped into the unit cube by the frame's own bounding box.
std::pair<std::vector<Vec3>, UnitCubeTransform> normalized_positions(const SemiRegularMesh& sr);

struct FrameReconstruction {
    SemiRegularMesh mesh;            // reconstruction in the frame's original coordinates
    std::vector<double> face_error;  // per fine face, mean of its corners' squared vertex errors
    double mse = 0.0;                // per coordinate, on normalized coordinates
};

/// Patch-wise encode/decode of one frame. `layout` must come from the frame's topology.
FrameReconstruction reconstruct_frame(const Checkpoint& ckpt, const SemiRegularMesh& sr, const PatchLayout& layout);
std::vector<FrameReconstruction> reconstruct_sequence(const Checkpoint& ckpt, std::span<const SemiRegularMesh> frames);

/// Latents of every patch of a frame, base face ascending: patch_count x 8.
Eigen::MatrixXd patch_latents(const Checkpoint& ckpt, const SemiRegularMesh& sr, const PatchLayout& layout);

struct PcaResult {
    Eigen::VectorXd mean;
    Eigen::MatrixXd components;   // k x D, rows orthonormal
    Eigen::MatrixXd projection;   // rows x k
    Eigen::VectorXd eigenvalues;  // k, descending
    Eigen::VectorXd explained_variance_ratio;
};

/// PCA via eigendecomposition of the column-centred covariance. Components are sign-fixed so
/// that each one's largest-magnitude entry is positive.
PcaResult pca_project(const Eigen::MatrixXd& data, int k = 2);

struct Embedding {
    Eigen::MatrixXd latents;  // frames x (patch_count * 8)
    PcaResult pca;
};

Embedding concat_latents(const Checkpoint& ckpt, std::span<const SemiRegularMesh> frames, int k = 2);

}  // namespace srae
