#include "srae/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "srae/errors.hpp"

namespace srae {

template <class T>
Autoencoder<T>::Autoencoder() {
    lat_ = {lattice(kModelLevel, kModelPad), lattice(kModelLevel - 1, pooled_pad(kModelPad)),
            lattice(kModelLevel - 2, pooled_pad(pooled_pad(kModelPad)))};
    const auto& l0 = lat_[0];
    const auto& l1 = lat_[1];
    const auto& l2 = lat_[2];
    const int flat = 32 * l2->storage_size();

    net_.add(std::make_unique<nn::HexConv<T>>(l0, 3, 16, 2));
    net_.add(std::make_unique<nn::Relu<T>>());
    net_.add(nn::make_pool<T>(*l0, *l1));
    net_.add(std::make_unique<nn::HexConv<T>>(l1, 16, 32, 1));
    net_.add(std::make_unique<nn::Relu<T>>());
    net_.add(nn::make_pool<T>(*l1, *l2));
    net_.add(std::make_unique<nn::Flatten<T>>(l2, 32));
    net_.add(std::make_unique<nn::Dense<T>>(flat, kLatentDim));

    net_.add(std::make_unique<nn::Dense<T>>(kLatentDim, flat));
    net_.add(std::make_unique<nn::Unflatten<T>>(l2, 32));
    net_.add(nn::make_unpool<T>(*l2, *l1));
    net_.add(std::make_unique<nn::HexConv<T>>(l1, 32, 16, 1));
    net_.add(std::make_unique<nn::Relu<T>>());
    net_.add(nn::make_unpool<T>(*l1, *l0));
    net_.add(std::make_unique<nn::HexConv<T>>(l0, 16, 16, 2));
    net_.add(std::make_unique<nn::Relu<T>>());
    net_.add(std::make_unique<nn::HexConv<T>>(l0, 16, 3, 1));
    net_.layer(0).set_input_grad(false);
}

template <class T>
std::vector<std::size_t> Autoencoder<T>::layer_param_counts() const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < net_.size(); ++k) {
        if (net_.layer(k).param_count() > 0) out.push_back(net_.layer(k).param_count());
    }
    return out;
}

template <class T>
std::string Autoencoder<T>::fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : net_.describe()) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

template <class T>
std::vector<int> Autoencoder<T>::cell_counts() const {
    return {lat_[0]->valid_count(), lat_[1]->valid_count(), lat_[2]->valid_count()};
}

template class Autoencoder<float>;
template class Autoencoder<double>;

template <class T>
nn::Matrix<T> patches_to_batch(std::span<const PatchGrid> patches) {
    if (patches.empty()) return nn::Matrix<T>(0, 3);
    const LatticeLayout& lat = *patches.front().lattice;
    const int v = lat.valid_count();
    nn::Matrix<T> x(static_cast<Eigen::Index>(patches.size()) * v, 3);
    for (std::size_t p = 0; p < patches.size(); ++p) {
        const PatchGrid& g = patches[p];
        if (g.lattice->level() != lat.level() || g.lattice->pad() != lat.pad() || g.channels < 3) {
            throw ValidationError("patch batch entries must share one layout");
        }
        for (int c = 0; c < v; ++c) {
            for (int ch = 0; ch < 3; ++ch) x(static_cast<Eigen::Index>(p) * v + c, ch) = static_cast<T>(g.cell(c, ch));
        }
    }
    return x;
}

template nn::Matrix<float> patches_to_batch<float>(std::span<const PatchGrid>);
template nn::Matrix<double> patches_to_batch<double>(std::span<const PatchGrid>);

std::vector<PatchGrid> batch_to_patches(const nn::Matrix<float>& batch, std::span<const PatchGrid> like) {
    std::vector<PatchGrid> out;
    out.reserve(like.size());
    for (std::size_t p = 0; p < like.size(); ++p) {
        PatchGrid g = make_patch(like[p].lattice, 3);
        g.base_face = like[p].base_face;
        g.patch_mean = like[p].patch_mean;
        const int v = g.lattice->valid_count();
        for (int c = 0; c < v; ++c) {
            for (int ch = 0; ch < 3; ++ch) g.cell(c, ch) = batch(static_cast<Eigen::Index>(p) * v + c, ch);
        }
        out.push_back(std::move(g));
    }
    return out;
}

// ---------------------------------------------------------------------------

void validate(const TrainConfig& cfg) {
    if (cfg.epochs < 1) throw ValidationError("epochs must be >= 1");
    if (cfg.batch_size < 1) throw ValidationError("batch size must be >= 1");
    if (!(cfg.learning_rate > 0)) throw ValidationError("learning rate must be positive");
    if (!(cfg.train_fraction > 0 && cfg.train_fraction <= 1)) throw ValidationError("train fraction must be in (0,1]");
}

Checkpoint new_checkpoint(std::uint64_t seed) {
    const Autoencoder<float> model;
    Checkpoint c;
    c.fingerprint = model.fingerprint();
    c.params = model.init_params(derive_seed(seed, "init"));
    return c;
}

namespace {

std::string layer_norms(Autoencoder<float>& model, const std::vector<float>& params) {
    std::ostringstream s;
    auto& net = model.net();
    for (std::size_t k = 0; k < net.size(); ++k) {
        const std::size_t n = net.layer(k).param_count();
        if (n == 0) continue;
        double sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) sq += static_cast<double>(params[net.offset(k) + i]) * params[net.offset(k) + i];
        s << " " << net.layer(k).describe() << "=" << std::sqrt(sq);
    }
    return s.str();
}

}  // namespace

TrainResult train(std::span<const PatchGrid> dataset, const TrainConfig& cfg,
                  const std::function<void(const EpochReport&)>& on_epoch) {
    validate(cfg);
    if (dataset.empty()) throw ValidationError("training dataset is empty");
    Autoencoder<float> model;
    const LatticeLayout& lat = model.input_lattice();
    for (const auto& g : dataset) {
        if (g.lattice->level() != lat.level() || g.lattice->pad() != lat.pad() || g.channels != 3) {
            throw ValidationError("training patches must have level 3, pad 2 and 3 channels");
        }
    }

    std::vector<PatchGrid> entries;
    const int rotations = cfg.augment ? 3 : 1;
    entries.reserve(dataset.size() * rotations);
    for (const auto& g : dataset) {
        for (int k = 0; k < rotations; ++k) entries.push_back(rotate_patch(g, k));
    }
    const nn::Matrix<float> all = patches_to_batch<float>(entries);
    const int v = lat.valid_count();
    const std::size_t count = entries.size();

    TrainResult res;
    Checkpoint& ckpt = res.checkpoint;
    ckpt = new_checkpoint(cfg.seed);
    nn::AdamConfig acfg;
    acfg.lr = cfg.learning_rate;
    ckpt.optimizer = nn::AdamState<float>(ckpt.params.size(), acfg);
    std::vector<float> grad(ckpt.params.size());
    res.batches_per_epoch = (count + cfg.batch_size - 1) / cfg.batch_size;

    std::vector<std::size_t> order(count);
    nn::Matrix<float> xb;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = count; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

        double epoch_sum = 0.0;
        for (std::size_t start = 0, batch = 0; start < count; start += cfg.batch_size, ++batch) {
            const std::size_t bs = std::min<std::size_t>(cfg.batch_size, count - start);
            xb.resize(static_cast<Eigen::Index>(bs) * v, 3);
            for (std::size_t b = 0; b < bs; ++b) {
                xb.middleRows(static_cast<Eigen::Index>(b) * v, v) =
                    all.middleRows(static_cast<Eigen::Index>(order[start + b]) * v, v);
            }
            const nn::Matrix<float> y = model.forward(xb, ckpt.params.data());
            const auto mse = nn::mse_interior<float>(y, xb, lat);
            if (!std::isfinite(mse.loss)) {
                throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                                     std::to_string(batch) + "; layer norms:" + layer_norms(model, ckpt.params));
            }
            std::fill(grad.begin(), grad.end(), 0.0f);
            model.backward(mse.grad, ckpt.params.data(), grad.data());
            nn::adam_step<float>(ckpt.params, grad, *ckpt.optimizer);
            epoch_sum += static_cast<double>(mse.loss) * static_cast<double>(bs);
        }
        const double epoch_loss = epoch_sum / static_cast<double>(count);
        res.loss_history.push_back(epoch_loss);
        ckpt.epoch = epoch + 1;
        if (on_epoch) on_epoch({epoch + 1, epoch_loss, res.batches_per_epoch});
    }
    ckpt.loss_history = res.loss_history;
    return res;
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char* kCheckpointFormat = "srae-checkpoint";

void append_floats(std::string& out, const std::vector<float>& v) {
    for (float f : v) {
        const std::uint32_t u = std::bit_cast<std::uint32_t>(f);
        for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((u >> (8 * b)) & 0xff));
    }
}

std::vector<float> read_floats(const unsigned char* p, std::size_t n) {
    std::vector<float> v(n);
    for (std::size_t i = 0; i < n; ++i, p += 4) {
        const std::uint32_t u = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                                (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
        v[i] = std::bit_cast<float>(u);
    }
    return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    nlohmann::json m;
    m["format"] = kCheckpointFormat;
    m["version"] = ckpt.version;
    m["fingerprint"] = ckpt.fingerprint;
    m["param_count"] = ckpt.params.size();
    m["epoch"] = ckpt.epoch;
    m["loss_history"] = ckpt.loss_history;
    const std::size_t blocks = ckpt.optimizer ? 3 : 1;
    m["blob_bytes"] = ckpt.params.size() * 4 * blocks;
    if (ckpt.optimizer) {
        const auto& o = *ckpt.optimizer;
        m["optimizer"] = {{"type", "adam"},       {"step", o.step},   {"lr", o.config.lr},
                          {"beta1", o.config.beta1}, {"beta2", o.config.beta2}, {"eps", o.config.eps}};
    }
    std::string blob;
    blob.reserve(ckpt.params.size() * 4 * blocks);
    append_floats(blob, ckpt.params);
    if (ckpt.optimizer) {
        if (ckpt.optimizer->m.size() != ckpt.params.size() || ckpt.optimizer->v.size() != ckpt.params.size()) {
            throw ValidationError("optimizer state does not match parameters");
        }
        append_floats(blob, ckpt.optimizer->m);
        append_floats(blob, ckpt.optimizer->v);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << m.dump() << '\n';
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const std::string& expected_fingerprint) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto nl = bytes.find('\n');
    if (nl == std::string::npos) throw ParseError(path.string() + ": corrupt checkpoint (no manifest)", 0);
    try {
        const auto m = nlohmann::json::parse(bytes.substr(0, nl));
        if (m.at("format").get<std::string>() != kCheckpointFormat) throw ParseError("not a checkpoint", 0);
        Checkpoint c;
        c.version = m.at("version").get<int>();
        if (c.version != 1) throw ValidationError("unsupported checkpoint version " + std::to_string(c.version));
        c.fingerprint = m.at("fingerprint").get<std::string>();
        const std::string expect =
            expected_fingerprint.empty() ? Autoencoder<float>().fingerprint() : expected_fingerprint;
        if (c.fingerprint != expect) {
            throw ValidationError("checkpoint architecture fingerprint " + c.fingerprint + " does not match " + expect);
        }
        const auto n = m.at("param_count").get<std::size_t>();
        const bool has_opt = m.contains("optimizer");
        const std::size_t blob = m.at("blob_bytes").get<std::size_t>();
        if (blob != n * 4 * (has_opt ? 3 : 1) || bytes.size() - nl - 1 != blob) {
            throw ParseError(path.string() + ": corrupt checkpoint (blob size mismatch, truncated?)", 0);
        }
        c.epoch = m.at("epoch").get<int>();
        c.loss_history = m.at("loss_history").get<std::vector<double>>();
        const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + nl + 1;
        c.params = read_floats(p, n);
        if (has_opt) {
            const auto& o = m.at("optimizer");
            nn::AdamConfig cfg;
            cfg.lr = o.at("lr").get<double>();
            cfg.beta1 = o.at("beta1").get<double>();
            cfg.beta2 = o.at("beta2").get<double>();
            cfg.eps = o.at("eps").get<double>();
            nn::AdamState<float> st(0, cfg);
            st.step = o.at("step").get<std::uint64_t>();
            st.m = read_floats(p + n * 4, n);
            st.v = read_floats(p + n * 8, n);
            c.optimizer = std::move(st);
        }
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": corrupt checkpoint manifest: " + e.what(), 0);
    }
}

// ---------------------------------------------------------------------------

std::pair<std::vector<Vec3>, UnitCubeTransform> normalized_positions(const SemiRegularMesh& sr) {
    const UnitCubeTransform t = unit_cube_transform(sr.fine_positions);
    std::vector<Vec3> out;
    out.reserve(sr.fine_positions.size());
    for (const Vec3& p : sr.fine_positions) out.push_back(t.apply(p));
    return {std::move(out), t};
}

namespace {

void check_layout(const Checkpoint& ckpt, const PatchLayout& layout) {
    if (layout.level != kModelLevel || layout.pad_width != kModelPad) {
        throw ValidationError("model expects level " + std::to_string(kModelLevel) + " patches with pad " +
                              std::to_string(kModelPad));
    }
    if (ckpt.params.size() != Autoencoder<float>().param_count()) {
        throw ValidationError("checkpoint parameter count does not match the architecture");
    }
}

bool same_topology(const SemiRegularMesh& a, const SemiRegularMesh& b) {
    return a.level == b.level && a.base.faces == b.base.faces && a.patch_grids == b.patch_grids &&
           a.fine_positions.size() == b.fine_positions.size();
}

}  // namespace

FrameReconstruction reconstruct_frame(const Checkpoint& ckpt, const SemiRegularMesh& sr, const PatchLayout& layout) {
    check_layout(ckpt, layout);
    const auto [pos, tf] = normalized_positions(sr);
    const auto patches = extract_patches(layout, pos);
    Autoencoder<float> model;
    const nn::Matrix<float> y = model.forward(patches_to_batch<float>(patches), ckpt.params.data());
    const auto decoded = batch_to_patches(y, patches);
    const std::vector<Vec3> rec = assemble_positions(decoded, layout);

    FrameReconstruction out;
    std::vector<double> vertex_err(rec.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < rec.size(); ++i) {
        vertex_err[i] = (rec[i] - pos[i]).squaredNorm() / 3.0;
        sum += vertex_err[i];
    }
    if (!std::isfinite(sum)) throw NumericalError("non-finite reconstruction");
    out.mse = sum / static_cast<double>(rec.size());
    for (const Face& f : sr.fine_faces()) {
        out.face_error.push_back((vertex_err[f[0]] + vertex_err[f[1]] + vertex_err[f[2]]) / 3.0);
    }
    std::vector<Vec3> world;
    world.reserve(rec.size());
    for (const Vec3& p : rec) world.push_back(tf.invert(p));
    out.mesh = sr.with_positions(std::move(world));
    return out;
}

std::vector<FrameReconstruction> reconstruct_sequence(const Checkpoint& ckpt, std::span<const SemiRegularMesh> frames) {
    std::vector<FrameReconstruction> out;
    std::optional<PatchLayout> layout;
    const SemiRegularMesh* layout_src = nullptr;
    for (const auto& sr : frames) {
        if (!layout || !same_topology(sr, *layout_src)) {
            layout = build_layout(sr, kModelPad);
            layout_src = &sr;
        }
        out.push_back(reconstruct_frame(ckpt, sr, *layout));
    }
    return out;
}

Eigen::MatrixXd patch_latents(const Checkpoint& ckpt, const SemiRegularMesh& sr, const PatchLayout& layout) {
    check_layout(ckpt, layout);
    const auto [pos, tf] = normalized_positions(sr);
    const auto patches = extract_patches(layout, pos);
    Autoencoder<float> model;
    const nn::Matrix<float> z = model.encode(patches_to_batch<float>(patches), ckpt.params.data());
    return z.cast<double>();
}

PcaResult pca_project(const Eigen::MatrixXd& data, int k) {
    if (k < 1) throw ValidationError("PCA needs k >= 1");
    if (data.rows() < std::max(2, k)) throw ValidationError("PCA needs at least max(2, k) rows");
    if (data.cols() < k) throw ValidationError("PCA needs at least k columns");
    PcaResult r;
    r.mean = data.colwise().mean().transpose();
    const Eigen::MatrixXd centered = data.rowwise() - r.mean.transpose();
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(data.rows() - 1);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) throw NumericalError("covariance eigendecomposition failed");
    const Eigen::Index d = cov.rows();
    const double total = std::max(0.0, es.eigenvalues().sum());
    r.components.resize(k, d);
    r.eigenvalues.resize(k);
    r.explained_variance_ratio.resize(k);
    for (int c = 0; c < k; ++c) {
        const Eigen::Index src = d - 1 - c;  // eigenvalues ascending
        Eigen::VectorXd vec = es.eigenvectors().col(src);
        Eigen::Index arg = 0;
        vec.cwiseAbs().maxCoeff(&arg);
        if (vec[arg] < 0) vec = -vec;
        r.components.row(c) = vec.transpose();
        r.eigenvalues[c] = std::max(0.0, es.eigenvalues()[src]);
        r.explained_variance_ratio[c] = total > 0 ? r.eigenvalues[c] / total : 0.0;
    }
    r.projection = centered * r.components.transpose();
    return r;
}

Embedding concat_latents(const Checkpoint& ckpt, std::span<const SemiRegularMesh> frames, int k) {
    if (frames.empty()) throw ValidationError("no frames to embed");
    Embedding e;
    std::optional<PatchLayout> layout;
    const SemiRegularMesh* layout_src = nullptr;
    for (std::size_t t = 0; t < frames.size(); ++t) {
        const auto& sr = frames[t];
        if (!layout || !same_topology(sr, *layout_src)) {
            layout = build_layout(sr, kModelPad);
            layout_src = &sr;
        }
        const Eigen::MatrixXd z = patch_latents(ckpt, sr, *layout);
        const Eigen::Index width = z.rows() * z.cols();
        if (t == 0) e.latents.resize(static_cast<Eigen::Index>(frames.size()), width);
        if (width != e.latents.cols()) throw ValidationError("all embedded frames need the same patch count");
        for (Eigen::Index p = 0; p < z.rows(); ++p) e.latents.block(static_cast<Eigen::Index>(t), p * z.cols(), 1, z.cols()) = z.row(p);
    }
    e.pca = pca_project(e.latents, k);
    return e;
}

}  // namespace srae
