#pragma once

// Network layers over batches of lattice features. A batch is a row-major matrix with one row
// per (patch, valid cell) pair, patch-major, and one column per channel.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "srae/errors.hpp"
#include "srae/lattice.hpp"
#include "srae/random.hpp"

namespace srae::nn {

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
class Layer {
public:
    virtual ~Layer() = default;
    /// Architecture description used for the checkpoint fingerprint.
    virtual std::string describe() const = 0;
    virtual std::size_t param_count() const { return 0; }
    /// Glorot fan sizes; zero for parameter-free layers.
    virtual std::size_t fan_in() const { return 0; }
    virtual std::size_t fan_out() const { return 0; }
    /// Number of leading parameters drawn from the Glorot range; the rest start at zero.
    virtual std::size_t weight_count() const { return param_count(); }

    virtual Matrix<T> forward(const Matrix<T>& x, const T* params) = 0;
    /// Returns d loss / d input and adds d loss / d params into `grad`. Uses the cache of the
    /// most recent forward call.
    virtual Matrix<T> backward(const Matrix<T>& dy, const T* params, T* grad) = 0;

    /// When false, backward may return an empty matrix instead of the input gradient.
    void set_input_grad(bool on) { input_grad_ = on; }
    bool input_grad() const { return input_grad_; }

private:
    bool input_grad_ = true;
};

namespace detail {

inline std::size_t batch_of(std::size_t rows, std::size_t per, const char* what) {
    if (per == 0 || rows % per != 0) throw ValidationError(std::string(what) + ": row count does not match layout");
    return rows / per;
}

template <class T>
Matrix<T> apply_sparse(const SparseMap& m, const Matrix<T>& x, std::size_t batch) {
    const std::size_t ch = static_cast<std::size_t>(x.cols());
    Matrix<T> y = Matrix<T>::Zero(static_cast<Eigen::Index>(batch * m.rows), x.cols());
    for (std::size_t b = 0; b < batch; ++b) {
        const T* xb = x.data() + b * m.cols * ch;
        T* yb = y.data() + b * m.rows * ch;
        for (std::size_t r = 0; r < m.rows; ++r) {
            T* out = yb + r * ch;
            for (int k = m.row_begin[r]; k < m.row_begin[r + 1]; ++k) {
                const T w = static_cast<T>(m.weight[k]);
                const T* in = xb + static_cast<std::size_t>(m.col[k]) * ch;
                for (std::size_t c = 0; c < ch; ++c) out[c] += w * in[c];
            }
        }
    }
    return y;
}

template <class T>
Matrix<T> apply_sparse_transpose(const SparseMap& m, const Matrix<T>& dy, std::size_t batch) {
    const std::size_t ch = static_cast<std::size_t>(dy.cols());
    Matrix<T> dx = Matrix<T>::Zero(static_cast<Eigen::Index>(batch * m.cols), dy.cols());
    for (std::size_t b = 0; b < batch; ++b) {
        const T* gb = dy.data() + b * m.rows * ch;
        T* xb = dx.data() + b * m.cols * ch;
        for (std::size_t r = 0; r < m.rows; ++r) {
            const T* g = gb + r * ch;
            for (int k = m.row_begin[r]; k < m.row_begin[r + 1]; ++k) {
                const T w = static_cast<T>(m.weight[k]);
                T* out = xb + static_cast<std::size_t>(m.col[k]) * ch;
                for (std::size_t c = 0; c < ch; ++c) out[c] += w * g[c];
            }
        }
    }
    return dx;
}

}  // namespace detail

/// Shape-preserving hexagonal convolution without bias. Parameters are stored [out][in][tap].
template <class T>
class HexConv : public Layer<T> {
public:
    HexConv(std::shared_ptr<const LatticeLayout> lat, int in, int out, int radius)
        : lat_(std::move(lat)), in_(in), out_(out), radius_(radius), taps_(hex_tap_count(radius)) {
        if (in < 1 || out < 1) throw ValidationError("convolution needs positive channel counts");
        lat_->neighbors(radius);
    }

    std::string describe() const override {
        return "hexconv(" + std::to_string(lat_->level()) + "," + std::to_string(lat_->pad()) + "," +
               std::to_string(in_) + "->" + std::to_string(out_) + ",r=" + std::to_string(radius_) + ")";
    }
    std::size_t param_count() const override { return static_cast<std::size_t>(in_) * out_ * taps_; }
    std::size_t fan_in() const override { return static_cast<std::size_t>(in_) * taps_; }
    std::size_t fan_out() const override { return static_cast<std::size_t>(out_) * taps_; }
    int in_channels() const { return in_; }
    int out_channels() const { return out_; }
    int radius() const { return radius_; }
    int taps() const { return taps_; }

    /// (taps*in) x out matrix with row t*in + i, column o holding W[o][i][t].
    Matrix<T> weight_matrix(const T* p) const {
        Matrix<T> w(taps_ * in_, out_);
        for (int o = 0; o < out_; ++o) {
            for (int i = 0; i < in_; ++i) {
                for (int t = 0; t < taps_; ++t) w(t * in_ + i, o) = p[(o * in_ + i) * taps_ + t];
            }
        }
        return w;
    }

    /// in x (taps*out) matrix with row i, column t*out + o holding W[o][i][t].
    Matrix<T> wide_matrix(const T* p) const {
        Matrix<T> w(in_, taps_ * out_);
        for (int o = 0; o < out_; ++o) {
            for (int i = 0; i < in_; ++i) {
                for (int t = 0; t < taps_; ++t) w(i, t * out_ + o) = p[(o * in_ + i) * taps_ + t];
            }
        }
        return w;
    }

    Matrix<T> forward(const Matrix<T>& x, const T* params) override {
        if (x.cols() != in_) throw ValidationError("hexconv: channel mismatch");
        const std::size_t v = lat_->valid_count();
        batch_ = detail::batch_of(static_cast<std::size_t>(x.rows()), v, "hexconv");
        x_ = x;
        Matrix<T> y(x.rows(), out_);
        if (gather_outputs()) {
            // y[c] = sum_t z[nbr(c,t)] restricted to tap t's output block
            const Matrix<T> z = x * wide_matrix(params);
            const auto& nbr = lat_->neighbors(radius_);
            const std::size_t zw = static_cast<std::size_t>(taps_) * out_;
            y.setZero();
            for (std::size_t b = 0; b < batch_; ++b) {
                const T* zb = z.data() + b * v * zw;
                for (std::size_t c = 0; c < v; ++c) {
                    T* out = y.data() + (b * v + c) * out_;
                    const int* nb = nbr.data() + c * taps_;
                    for (int t = 0; t < taps_; ++t) {
                        if (nb[t] < 0) continue;
                        const T* src = zb + static_cast<std::size_t>(nb[t]) * zw + static_cast<std::size_t>(t) * out_;
                        for (int o = 0; o < out_; ++o) out[o] += src[o];
                    }
                }
            }
        } else {
            const Matrix<T> w = weight_matrix(params);
            const std::size_t chunk = chunk_patches();
            for (std::size_t b0 = 0; b0 < batch_; b0 += chunk) {
                const std::size_t b1 = std::min(batch_, b0 + chunk);
                im2col(b0, b1);
                y.middleRows(static_cast<Eigen::Index>(b0 * v), static_cast<Eigen::Index>((b1 - b0) * v)).noalias() =
                    buf_ * w;
            }
        }
        return y;
    }

    Matrix<T> backward(const Matrix<T>& dy, const T* params, T* grad) override {
        if (dy.cols() != out_ || dy.rows() != x_.rows()) throw ValidationError("hexconv: gradient shape mismatch");
        const std::size_t v = lat_->valid_count();
        const auto& nbr = lat_->neighbors(radius_);
        Matrix<T> dx;
        if (this->input_grad()) dx.setZero(dy.rows(), in_);
        if (gather_outputs()) {
            const std::size_t zw = static_cast<std::size_t>(taps_) * out_;
            Matrix<T> dz = Matrix<T>::Zero(dy.rows(), static_cast<Eigen::Index>(zw));
            for (std::size_t b = 0; b < batch_; ++b) {
                T* zb = dz.data() + b * v * zw;
                for (std::size_t c = 0; c < v; ++c) {
                    const T* g = dy.data() + (b * v + c) * out_;
                    const int* nb = nbr.data() + c * taps_;
                    for (int t = 0; t < taps_; ++t) {
                        if (nb[t] < 0) continue;
                        T* dst = zb + static_cast<std::size_t>(nb[t]) * zw + static_cast<std::size_t>(t) * out_;
                        for (int o = 0; o < out_; ++o) dst[o] += g[o];
                    }
                }
            }
            const Matrix<T> dw = x_.transpose() * dz;
            for (int o = 0; o < out_; ++o) {
                for (int i = 0; i < in_; ++i) {
                    for (int t = 0; t < taps_; ++t) grad[(o * in_ + i) * taps_ + t] += dw(i, t * out_ + o);
                }
            }
            if (!this->input_grad()) return Matrix<T>();
            dx.noalias() = dz * wide_matrix(params).transpose();
            return dx;
        }

        const Matrix<T> w = weight_matrix(params);
        const Eigen::Index width = static_cast<Eigen::Index>(taps_) * in_;
        Matrix<T> dw = Matrix<T>::Zero(width, out_);
        Matrix<T> dcols;
        const std::size_t chunk = chunk_patches();
        for (std::size_t b0 = 0; b0 < batch_; b0 += chunk) {
            const std::size_t b1 = std::min(batch_, b0 + chunk);
            const auto rows = dy.middleRows(static_cast<Eigen::Index>(b0 * v), static_cast<Eigen::Index>((b1 - b0) * v));
            im2col(b0, b1);
            dw.noalias() += buf_.transpose() * rows;
            if (!this->input_grad()) continue;
            dcols.noalias() = rows * w.transpose();
            for (std::size_t b = b0; b < b1; ++b) {
                T* xb = dx.data() + b * v * in_;
                for (std::size_t c = 0; c < v; ++c) {
                    const T* src = dcols.data() + ((b - b0) * v + c) * width;
                    const int* nb = nbr.data() + c * taps_;
                    for (int t = 0; t < taps_; ++t, src += in_) {
                        if (nb[t] < 0) continue;
                        T* dst = xb + static_cast<std::size_t>(nb[t]) * in_;
                        for (int i = 0; i < in_; ++i) dst[i] += src[i];
                    }
                }
            }
        }
        for (int o = 0; o < out_; ++o) {
            for (int i = 0; i < in_; ++i) {
                for (int t = 0; t < taps_; ++t) grad[(o * in_ + i) * taps_ + t] += dw(t * in_ + i, o);
            }
        }
        return dx;  // empty when input gradients are off
    }

private:
    bool gather_outputs() const { return out_ < in_; }

    // Patches per im2col block, sized to stay cache resident.
    std::size_t chunk_patches() const {
        const std::size_t bytes = static_cast<std::size_t>(lat_->valid_count()) * taps_ * in_ * sizeof(T);
        return std::max<std::size_t>(1, (std::size_t{1} << 19) / bytes);
    }

    // Neighbourhood rows of patches [b0, b1) of the cached input into buf_.
    void im2col(std::size_t b0, std::size_t b1) {
        const std::size_t v = lat_->valid_count();
        const auto& nbr = lat_->neighbors(radius_);
        const std::size_t width = static_cast<std::size_t>(taps_) * in_;
        buf_.resize(static_cast<Eigen::Index>((b1 - b0) * v), static_cast<Eigen::Index>(width));
        for (std::size_t b = b0; b < b1; ++b) {
            const T* xb = x_.data() + b * v * in_;
            for (std::size_t c = 0; c < v; ++c) {
                T* dst = buf_.data() + ((b - b0) * v + c) * width;
                const int* nb = nbr.data() + c * taps_;
                for (int t = 0; t < taps_; ++t, dst += in_) {
                    if (nb[t] < 0) {
                        std::fill_n(dst, in_, T(0));
                    } else {
                        std::copy_n(xb + static_cast<std::size_t>(nb[t]) * in_, in_, dst);
                    }
                }
            }
        }
    }

    std::shared_ptr<const LatticeLayout> lat_;
    int in_, out_, radius_, taps_;
    std::size_t batch_ = 0;
    Matrix<T> x_;
    Matrix<T> buf_;
};

/// Fixed linear resampling between two lattices (pooling or unpooling).
template <class T>
class Resample : public Layer<T> {
public:
    Resample(std::string name, SparseMap map) : name_(std::move(name)), map_(std::move(map)) {}

    std::string describe() const override { return name_; }
    const SparseMap& map() const { return map_; }

    Matrix<T> forward(const Matrix<T>& x, const T*) override {
        batch_ = detail::batch_of(static_cast<std::size_t>(x.rows()), map_.cols, name_.c_str());
        return detail::apply_sparse(map_, x, batch_);
    }
    Matrix<T> backward(const Matrix<T>& dy, const T*, T*) override {
        if (static_cast<std::size_t>(dy.rows()) != batch_ * map_.rows) {
            throw ValidationError(name_ + ": gradient shape mismatch");
        }
        return detail::apply_sparse_transpose(map_, dy, batch_);
    }

private:
    std::string name_;
    SparseMap map_;
    std::size_t batch_ = 0;
};

template <class T>
std::unique_ptr<Resample<T>> make_pool(const LatticeLayout& fine, const LatticeLayout& coarse) {
    return std::make_unique<Resample<T>>(
        "pool(" + std::to_string(fine.valid_count()) + "->" + std::to_string(coarse.valid_count()) + ")",
        pool_map(fine, coarse));
}

template <class T>
std::unique_ptr<Resample<T>> make_unpool(const LatticeLayout& coarse, const LatticeLayout& fine) {
    return std::make_unique<Resample<T>>(
        "unpool(" + std::to_string(coarse.valid_count()) + "->" + std::to_string(fine.valid_count()) + ")",
        unpool_map(coarse, fine));
}

template <class T>
class Relu : public Layer<T> {
public:
    std::string describe() const override { return "relu"; }
    Matrix<T> forward(const Matrix<T>& x, const T*) override {
        mask_ = (x.array() > T(0)).template cast<T>();
        return x.cwiseMax(T(0));
    }
    Matrix<T> backward(const Matrix<T>& dy, const T*, T*) override {
        if (dy.rows() != mask_.rows() || dy.cols() != mask_.cols()) throw ValidationError("relu: shape mismatch");
        return dy.cwiseProduct(mask_);
    }

private:
    Matrix<T> mask_;
};

/// Affine map on rows. Parameters: weights [in][out], then bias [out].
template <class T>
class Dense : public Layer<T> {
public:
    Dense(int in, int out) : in_(in), out_(out) {}

    std::string describe() const override {
        return "dense(" + std::to_string(in_) + "->" + std::to_string(out_) + ")";
    }
    std::size_t param_count() const override { return static_cast<std::size_t>(in_) * out_ + out_; }
    std::size_t fan_in() const override { return in_; }
    std::size_t fan_out() const override { return out_; }
    std::size_t weight_count() const override { return static_cast<std::size_t>(in_) * out_; }

    Matrix<T> forward(const Matrix<T>& x, const T* params) override {
        if (x.cols() != in_) throw ValidationError("dense: input width mismatch");
        x_ = x;
        const Eigen::Map<const Matrix<T>> w(params, in_, out_);
        const Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(params + in_ * out_, out_);
        Matrix<T> y = x * w;
        y.rowwise() += b;
        return y;
    }
    Matrix<T> backward(const Matrix<T>& dy, const T* params, T* grad) override {
        if (dy.cols() != out_ || dy.rows() != x_.rows()) throw ValidationError("dense: gradient shape mismatch");
        Eigen::Map<Matrix<T>> gw(grad, in_, out_);
        Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> gb(grad + in_ * out_, out_);
        gw += x_.transpose() * dy;
        const Eigen::Matrix<T, 1, Eigen::Dynamic> db = dy.colwise().sum();
        gb += db;
        const Eigen::Map<const Matrix<T>> w(params, in_, out_);
        return dy * w.transpose();
    }

private:
    int in_, out_;
    Matrix<T> x_;
};

/// (batch*valid) x C  ->  batch x (C * storage): channel-major over the full square storage with
/// zeros on invalid cells.
template <class T>
class Flatten : public Layer<T> {
public:
    Flatten(std::shared_ptr<const LatticeLayout> lat, int channels) : lat_(std::move(lat)), channels_(channels) {}

    std::string describe() const override {
        return "flatten(" + std::to_string(lat_->valid_count()) + "x" + std::to_string(channels_) + "->" +
               std::to_string(width()) + ")";
    }
    int width() const { return channels_ * lat_->storage_size(); }

    Matrix<T> forward(const Matrix<T>& x, const T*) override {
        if (x.cols() != channels_) throw ValidationError("flatten: channel mismatch");
        const std::size_t v = lat_->valid_count();
        batch_ = detail::batch_of(static_cast<std::size_t>(x.rows()), v, "flatten");
        const int s = lat_->storage_size();
        Matrix<T> y = Matrix<T>::Zero(static_cast<Eigen::Index>(batch_), width());
        for (std::size_t b = 0; b < batch_; ++b) {
            for (std::size_t c = 0; c < v; ++c) {
                for (int ch = 0; ch < channels_; ++ch) {
                    y(b, ch * s + lat_->cell_storage()[c]) = x(b * v + c, ch);
                }
            }
        }
        return y;
    }
    Matrix<T> backward(const Matrix<T>& dy, const T*, T*) override {
        return unflatten(dy);
    }
    Matrix<T> unflatten(const Matrix<T>& y) const {
        if (y.cols() != width()) throw ValidationError("unflatten: width mismatch");
        const std::size_t v = lat_->valid_count();
        const int s = lat_->storage_size();
        Matrix<T> x(y.rows() * static_cast<Eigen::Index>(v), channels_);
        for (Eigen::Index b = 0; b < y.rows(); ++b) {
            for (std::size_t c = 0; c < v; ++c) {
                for (int ch = 0; ch < channels_; ++ch) x(b * v + c, ch) = y(b, ch * s + lat_->cell_storage()[c]);
            }
        }
        return x;
    }

private:
    std::shared_ptr<const LatticeLayout> lat_;
    int channels_;
    std::size_t batch_ = 0;
};

/// Inverse of Flatten; invalid storage entries are dropped.
template <class T>
class Unflatten : public Layer<T> {
public:
    Unflatten(std::shared_ptr<const LatticeLayout> lat, int channels) : flat_(std::move(lat), channels) {}

    std::string describe() const override { return "un" + flat_.describe(); }
    Matrix<T> forward(const Matrix<T>& x, const T*) override { return flat_.unflatten(x); }
    Matrix<T> backward(const Matrix<T>& dy, const T* p, T*) override { return flat_.forward(dy, p); }

private:
    Flatten<T> flat_;
};

/// Mean squared channel error over interior cells only.
template <class T>
struct MseResult {
    T loss = 0;
    Matrix<T> grad;
};

template <class T>
MseResult<T> mse_interior(const Matrix<T>& pred, const Matrix<T>& target, const LatticeLayout& lat) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw ValidationError("mse: shape mismatch");
    const std::size_t v = lat.valid_count();
    const std::size_t batch = detail::batch_of(static_cast<std::size_t>(pred.rows()), v, "mse");
    const double denom = static_cast<double>(batch) * lat.interior_count() * pred.cols();
    MseResult<T> r;
    r.grad = Matrix<T>::Zero(pred.rows(), pred.cols());
    double sum = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < v; ++c) {
            if (!lat.interior(static_cast<int>(c))) continue;
            const auto row = static_cast<Eigen::Index>(b * v + c);
            const auto d = (pred.row(row) - target.row(row)).eval();
            sum += static_cast<double>(d.squaredNorm());
            r.grad.row(row) = d * static_cast<T>(2.0 / denom);
        }
    }
    r.loss = static_cast<T>(sum / denom);
    return r;
}

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <class T>
struct AdamState {
    AdamConfig config;
    std::vector<T> m, v;
    std::uint64_t step = 0;

    explicit AdamState(std::size_t n = 0, AdamConfig cfg = {}) : config(cfg), m(n, T(0)), v(n, T(0)) {}
};

/// Bias-corrected Adam update.
template <class T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& st) {
    if (params.size() != grads.size() || st.m.size() != params.size() || st.v.size() != params.size()) {
        throw ValidationError("adam: shape mismatch");
    }
    ++st.step;
    const auto& c = st.config;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(st.step));
    const T b1 = static_cast<T>(c.beta1), b2 = static_cast<T>(c.beta2);
    const T step_size = static_cast<T>(c.lr / bc1);
    const T inv_bc2 = static_cast<T>(1.0 / bc2);
    const T eps = static_cast<T>(c.eps);
    for (std::size_t k = 0; k < params.size(); ++k) {
        const T g = grads[k];
        st.m[k] = b1 * st.m[k] + (T(1) - b1) * g;
        st.v[k] = b2 * st.v[k] + (T(1) - b2) * g * g;
        params[k] -= step_size * st.m[k] / (std::sqrt(st.v[k] * inv_bc2) + eps);
    }
}

/// Ordered stack of layers sharing one flat parameter vector.
template <class T>
class Sequential {
public:
    void add(std::unique_ptr<Layer<T>> layer) {
        offsets_.push_back(total_);
        total_ += layer->param_count();
        layers_.push_back(std::move(layer));
    }

    std::size_t param_count() const { return total_; }
    std::size_t size() const { return layers_.size(); }
    Layer<T>& layer(std::size_t k) { return *layers_[k]; }
    const Layer<T>& layer(std::size_t k) const { return *layers_[k]; }
    std::size_t offset(std::size_t k) const { return offsets_[k]; }

    /// Runs layers [first, last).
    Matrix<T> forward(Matrix<T> x, const T* params, std::size_t first, std::size_t last) {
        for (std::size_t k = first; k < last; ++k) x = layers_[k]->forward(x, params + offsets_[k]);
        return x;
    }
    Matrix<T> backward(Matrix<T> dy, const T* params, T* grad, std::size_t first, std::size_t last) {
        for (std::size_t k = last; k-- > first;) {
            dy = layers_[k]->backward(dy, params + offsets_[k], grad + offsets_[k]);
        }
        return dy;
    }

    /// Glorot-uniform weights, zero biases; deterministic per seed.
    std::vector<T> init_params(std::uint64_t seed) const {
        std::vector<T> p(total_, T(0));
        for (std::size_t k = 0; k < layers_.size(); ++k) {
            const Layer<T>& l = *layers_[k];
            if (l.param_count() == 0) continue;
            Rng rng(derive_seed(seed, "init", k));
            const double a = std::sqrt(6.0 / static_cast<double>(l.fan_in() + l.fan_out()));
            for (std::size_t i = 0; i < l.weight_count(); ++i) p[offsets_[k] + i] = static_cast<T>(uniform(rng, -a, a));
        }
        return p;
    }

    std::string describe() const {
        std::string s;
        for (const auto& l : layers_) s += l->describe() + ";";
        return s;
    }

private:
    std::vector<std::unique_ptr<Layer<T>>> layers_;
    std::vector<std::size_t> offsets_;
    std::size_t total_ = 0;
};

}  // namespace srae::nn
