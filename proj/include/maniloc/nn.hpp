#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "maniloc/errors.hpp"
#include "maniloc/resize.hpp"
#include "maniloc/types.hpp"

namespace maniloc::nn {

/// Flat view over one parameter (or gradient) blob.
template <typename Scalar>
struct ParamRef {
    Scalar* data = nullptr;
    std::int64_t size = 0;
};

template <typename Scalar>
std::int64_t total_size(const std::vector<ParamRef<Scalar>>& params) {
    std::int64_t n = 0;
    for (const auto& p : params) n += p.size;
    return n;
}

// ---------------------------------------------------------------------------
// im2col + GEMM convolution
// ---------------------------------------------------------------------------

/// Column order inside a patch row-block: tap-major, channels contiguous:
/// row = (ky * k + kx) * in_ch + ci. Weight matrices follow the same order.
template <typename Scalar>
void im2col(const Grid<Scalar>& x, int k, int stride, int pad, int out_w,
            std::int64_t col_begin, std::int64_t col_end, Mat<Scalar>& cols) {
    const int in_ch = x.channels;
    const std::int64_t ncols = col_end - col_begin;
    cols.resize(std::int64_t(k) * k * in_ch, ncols);
    for (std::int64_t j = 0; j < ncols; ++j) {
        const std::int64_t p = col_begin + j;
        const int oy = int(p / out_w);
        const int ox = int(p % out_w);
        for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * stride - pad + ky;
            for (int kx = 0; kx < k; ++kx) {
                const int ix = ox * stride - pad + kx;
                auto dst = cols.col(j).segment(std::int64_t(ky * k + kx) * in_ch, in_ch);
                if (iy < 0 || iy >= x.height || ix < 0 || ix >= x.width)
                    dst.setZero();
                else
                    dst = x.data.col(std::int64_t(iy) * x.width + ix);
            }
        }
    }
}

/// 2-D convolution; weight is (out_ch) x (k*k*in_ch) in the im2col row order.
/// Backward passes are provided for the stride-1 case only, which is all the
/// decoders need; backbone convolutions run frozen and never differentiate.
template <typename Scalar>
struct Conv2d {
    int in_ch = 0, out_ch = 0, ksize = 0, stride = 1, pad = 0;
    Mat<Scalar> weight;
    Vec<Scalar> bias;  // size 0 means no bias

    // Gradient buffers (allocated by zero_grad).
    Mat<Scalar> grad_weight;
    Vec<Scalar> grad_bias;

    static constexpr std::int64_t kColBudget = 16 << 20;  // floats per im2col tile

    int out_size(int in, int /*axis*/) const { return (in + 2 * pad - ksize) / stride + 1; }

    Grid<Scalar> forward(const Grid<Scalar>& x) const {
        if (x.channels != in_ch)
            throw ValidationError(ValidationCode::dimension_mismatch, "conv2d: channel mismatch");
        const int oh = out_size(x.height, 0), ow = out_size(x.width, 1);
        Grid<Scalar> y(oh, ow, out_ch);
        const std::int64_t rows = std::int64_t(ksize) * ksize * in_ch;
        const std::int64_t tile = std::max<std::int64_t>(1, kColBudget / rows);
        Mat<Scalar> cols;
        for (std::int64_t c0 = 0; c0 < y.locations(); c0 += tile) {
            const std::int64_t c1 = std::min(y.locations(), c0 + tile);
            im2col(x, ksize, stride, pad, ow, c0, c1, cols);
            y.data.middleCols(c0, c1 - c0).noalias() = weight * cols;
        }
        if (bias.size() > 0) y.data.colwise() += bias;
        return y;
    }

    /// dL/dx via convolution with the spatially flipped, channel-transposed
    /// kernel. Stride-1 only.
    Grid<Scalar> backward_input(const Grid<Scalar>& grad_out, int in_h, int in_w) const {
        if (stride != 1)
            throw RuntimeFailure("conv2d backward requires stride 1");
        const int k = ksize;
        Mat<Scalar> flipped(in_ch, std::int64_t(k) * k * out_ch);
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx)
                for (int co = 0; co < out_ch; ++co)
                    for (int ci = 0; ci < in_ch; ++ci)
                        flipped(ci, std::int64_t(ky * k + kx) * out_ch + co) =
                            weight(co, std::int64_t((k - 1 - ky) * k + (k - 1 - kx)) * in_ch + ci);
        Conv2d<Scalar> transpose;
        transpose.in_ch = out_ch;
        transpose.out_ch = in_ch;
        transpose.ksize = k;
        transpose.stride = 1;
        transpose.pad = k - 1 - pad;
        transpose.weight = std::move(flipped);
        Grid<Scalar> gx = transpose.forward(grad_out);
        if (gx.height != in_h || gx.width != in_w)
            throw RuntimeFailure("conv2d backward: unexpected input shape");
        return gx;
    }

    void accumulate_param_grads(const Grid<Scalar>& x, const Grid<Scalar>& grad_out) {
        const std::int64_t rows = std::int64_t(ksize) * ksize * in_ch;
        const std::int64_t tile = std::max<std::int64_t>(1, kColBudget / rows);
        Mat<Scalar> cols;
        for (std::int64_t c0 = 0; c0 < grad_out.locations(); c0 += tile) {
            const std::int64_t c1 = std::min(grad_out.locations(), c0 + tile);
            im2col(x, ksize, stride, pad, grad_out.width, c0, c1, cols);
            grad_weight.noalias() += grad_out.data.middleCols(c0, c1 - c0) * cols.transpose();
        }
        if (bias.size() > 0) grad_bias += grad_out.data.rowwise().sum();
    }

    void zero_grad() {
        grad_weight.setZero(weight.rows(), weight.cols());
        grad_bias.setZero(bias.size());
    }

    std::int64_t parameter_count() const { return weight.size() + bias.size(); }
};

// ---------------------------------------------------------------------------
// Batch normalization over (batch, H, W) per channel
// ---------------------------------------------------------------------------

template <typename Scalar>
struct BatchNorm2d {
    Vec<Scalar> gamma, beta;
    Vec<Scalar> running_mean, running_var;
    Scalar eps = Scalar(1e-5);
    Scalar momentum = Scalar(0.1);

    Vec<Scalar> grad_gamma, grad_beta;

    struct Cache {
        Vec<Scalar> mean, inv_std;
    };

    explicit BatchNorm2d(int channels = 0) { resize(channels); }

    void resize(int channels) {
        gamma = Vec<Scalar>::Ones(channels);
        beta = Vec<Scalar>::Zero(channels);
        running_mean = Vec<Scalar>::Zero(channels);
        running_var = Vec<Scalar>::Ones(channels);
    }

    int channels() const { return int(gamma.size()); }

    /// Training-mode forward over a whole batch; batch statistics are reduced
    /// in fixed image order so replays are bit-identical. A non-negative
    /// `momentum_override` replaces the stored momentum for this update
    /// (used when re-estimating statistics after training).
    std::vector<Grid<Scalar>> forward_train(const std::vector<Grid<Scalar>>& z, Cache& cache,
                                            bool update_running = true,
                                            Scalar momentum_override = Scalar(-1)) {
        const int c = channels();
        std::int64_t n = 0;
        Vec<Scalar> sum = Vec<Scalar>::Zero(c), sum_sq = Vec<Scalar>::Zero(c);
        for (const auto& g : z) {
            sum += g.data.rowwise().sum();
            sum_sq += g.data.array().square().matrix().rowwise().sum();
            n += g.locations();
        }
        cache.mean = sum / Scalar(n);
        Vec<Scalar> var =
            (sum_sq / Scalar(n) - cache.mean.array().square().matrix()).cwiseMax(Scalar(0));
        cache.inv_std = (var.array() + eps).rsqrt();
        if (update_running) {
            const Scalar m = momentum_override >= 0 ? momentum_override : momentum;
            const Scalar unbias = n > 1 ? Scalar(n) / Scalar(n - 1) : Scalar(1);
            running_mean = (1 - m) * running_mean + m * cache.mean;
            running_var = (1 - m) * running_var + m * unbias * var;
        }
        return affine(z, cache.mean, cache.inv_std);
    }

    std::vector<Grid<Scalar>> forward_eval(const std::vector<Grid<Scalar>>& z) const {
        Vec<Scalar> inv_std = (running_var.array() + eps).rsqrt();
        return affine(z, running_mean, inv_std);
    }

    /// grad_z from grad_y (already masked by any following activation).
    std::vector<Grid<Scalar>> backward(const std::vector<Grid<Scalar>>& z,
                                       const std::vector<Grid<Scalar>>& grad_y,
                                       const Cache& cache) {
        const int c = channels();
        std::int64_t n = 0;
        Vec<Scalar> g_beta = Vec<Scalar>::Zero(c), g_gamma = Vec<Scalar>::Zero(c);
        for (std::size_t b = 0; b < z.size(); ++b) {
            g_beta += grad_y[b].data.rowwise().sum();
            Mat<Scalar> xhat = normalized(z[b], cache);
            g_gamma += (grad_y[b].data.array() * xhat.array()).matrix().rowwise().sum();
            n += z[b].locations();
        }
        grad_beta += g_beta;
        grad_gamma += g_gamma;
        const Vec<Scalar> scale = gamma.cwiseProduct(cache.inv_std);
        const Vec<Scalar> mean_g = g_beta / Scalar(n);
        const Vec<Scalar> mean_gx = g_gamma / Scalar(n);
        std::vector<Grid<Scalar>> grad_z(z.size());
        for (std::size_t b = 0; b < z.size(); ++b) {
            Mat<Scalar> xhat = normalized(z[b], cache);
            grad_z[b] = Grid<Scalar>(z[b].height, z[b].width, c);
            grad_z[b].data = (((grad_y[b].data.colwise() - mean_g).array() -
                               xhat.array().colwise() * mean_gx.array())
                                  .colwise() *
                              scale.array())
                                 .matrix();
        }
        return grad_z;
    }

    void zero_grad() {
        grad_gamma.setZero(gamma.size());
        grad_beta.setZero(beta.size());
    }

    std::int64_t parameter_count() const { return gamma.size() + beta.size(); }

private:
    Mat<Scalar> normalized(const Grid<Scalar>& z, const Cache& cache) const {
        return ((z.data.colwise() - cache.mean).array().colwise() * cache.inv_std.array())
            .matrix();
    }

    std::vector<Grid<Scalar>> affine(const std::vector<Grid<Scalar>>& z, const Vec<Scalar>& mean,
                                     const Vec<Scalar>& inv_std) const {
        const Vec<Scalar> scale = gamma.cwiseProduct(inv_std);
        const Vec<Scalar> shift = beta - mean.cwiseProduct(scale);
        std::vector<Grid<Scalar>> y(z.size());
        for (std::size_t b = 0; b < z.size(); ++b) {
            y[b] = Grid<Scalar>(z[b].height, z[b].width, channels());
            y[b].data =
                ((z[b].data.array().colwise() * scale.array()).colwise() + shift.array()).matrix();
        }
        return y;
    }
};

// ---------------------------------------------------------------------------
// Pointwise pieces
// ---------------------------------------------------------------------------

template <typename Scalar>
void relu_inplace(Grid<Scalar>& g) {
    g.data = g.data.cwiseMax(Scalar(0));
}

/// ReLU gradient gate using the post-activation values.
template <typename Scalar>
void relu_backward_inplace(Grid<Scalar>& grad, const Grid<Scalar>& post) {
    grad.data = (post.data.array() > Scalar(0)).select(grad.data, Scalar(0));
}

template <typename Scalar>
Scalar sigmoid(Scalar z) {
    return z >= 0 ? 1 / (1 + std::exp(-z)) : std::exp(z) / (1 + std::exp(z));
}

/// x * sigmoid(1.702 x); the activation CLIP's transformer uses.
template <typename Scalar>
Mat<Scalar> quick_gelu(const Mat<Scalar>& x) {
    return x.array() * (1 / (1 + (-Scalar(1.702) * x.array()).exp()));
}

template <typename Scalar>
Mat<Scalar> quick_gelu_backward(const Mat<Scalar>& x, const Mat<Scalar>& grad_y) {
    auto s = (1 / (1 + (-Scalar(1.702) * x.array()).exp()));
    return (grad_y.array() * (s + x.array() * Scalar(1.702) * s * (1 - s))).matrix();
}

// ---------------------------------------------------------------------------
// Token-space layers (columns are tokens)
// ---------------------------------------------------------------------------

template <typename Scalar>
struct Linear {
    Mat<Scalar> weight;  // out x in
    Vec<Scalar> bias;

    Mat<Scalar> grad_weight;
    Vec<Scalar> grad_bias;

    Mat<Scalar> forward(const Mat<Scalar>& x) const {
        Mat<Scalar> y = weight * x;
        if (bias.size() > 0) y.colwise() += bias;
        return y;
    }

    Mat<Scalar> backward(const Mat<Scalar>& x, const Mat<Scalar>& grad_y) {
        grad_weight.noalias() += grad_y * x.transpose();
        if (bias.size() > 0) grad_bias += grad_y.rowwise().sum();
        return weight.transpose() * grad_y;
    }

    void zero_grad() {
        grad_weight.setZero(weight.rows(), weight.cols());
        grad_bias.setZero(bias.size());
    }

    std::int64_t parameter_count() const { return weight.size() + bias.size(); }
};

/// Layer normalization over the feature axis (rows), one token per column.
template <typename Scalar>
struct LayerNorm {
    Vec<Scalar> gamma, beta;
    Scalar eps = Scalar(1e-5);

    Vec<Scalar> grad_gamma, grad_beta;

    explicit LayerNorm(int dim = 0) {
        gamma = Vec<Scalar>::Ones(dim);
        beta = Vec<Scalar>::Zero(dim);
    }

    Mat<Scalar> forward(const Mat<Scalar>& x) const {
        const auto d = Scalar(x.rows());
        Eigen::Array<Scalar, 1, Eigen::Dynamic> mean = x.array().colwise().sum() / d;
        Mat<Scalar> centered = x.array().rowwise() - mean;
        Eigen::Array<Scalar, 1, Eigen::Dynamic> inv_std =
            ((centered.array().square().colwise().sum() / d) + eps).rsqrt();
        return ((centered.array().rowwise() * inv_std).colwise() * gamma.array())
                   .colwise() +
               beta.array();
    }

    Mat<Scalar> backward(const Mat<Scalar>& x, const Mat<Scalar>& grad_y) {
        const auto d = Scalar(x.rows());
        Eigen::Array<Scalar, 1, Eigen::Dynamic> mean = x.array().colwise().sum() / d;
        Mat<Scalar> centered = x.array().rowwise() - mean;
        Eigen::Array<Scalar, 1, Eigen::Dynamic> inv_std =
            ((centered.array().square().colwise().sum() / d) + eps).rsqrt();
        Mat<Scalar> xhat = centered.array().rowwise() * inv_std;
        grad_gamma += (grad_y.array() * xhat.array()).matrix().rowwise().sum();
        grad_beta += grad_y.rowwise().sum();
        Mat<Scalar> g = grad_y.array().colwise() * gamma.array();
        Eigen::Array<Scalar, 1, Eigen::Dynamic> mean_g = g.array().colwise().sum() / d;
        Eigen::Array<Scalar, 1, Eigen::Dynamic> mean_gx =
            (g.array() * xhat.array()).colwise().sum() / d;
        return ((g.array().rowwise() - mean_g) - xhat.array().rowwise() * mean_gx).rowwise() *
               inv_std;
    }

    void zero_grad() {
        grad_gamma.setZero(gamma.size());
        grad_beta.setZero(beta.size());
    }

    std::int64_t parameter_count() const { return gamma.size() + beta.size(); }
};

/// Row-wise softmax (each row sums to 1), numerically stabilized.
template <typename Scalar>
Mat<Scalar> softmax_rows(const Mat<Scalar>& s) {
    Mat<Scalar> out(s.rows(), s.cols());
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        auto row = s.row(i).array();
        Eigen::Array<Scalar, 1, Eigen::Dynamic> e = (row - row.maxCoeff()).exp();
        out.row(i) = e / e.sum();
    }
    return out;
}

}  // namespace maniloc::nn
