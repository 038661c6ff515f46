#pragma once

#include <vector>

#include "maniloc/nn.hpp"

namespace maniloc::nn {

/// Multi-head self-attention on a token matrix (dim x tokens). The QKV
/// projection is packed torch-style: rows [0,D) queries, [D,2D) keys,
/// [2D,3D) values, heads stacked inside each third.
template <typename Scalar>
struct MultiHeadAttention {
    int dim = 0;
    int heads = 0;
    Linear<Scalar> qkv;  // 3*dim x dim
    Linear<Scalar> out;  // dim x dim

    struct Cache {
        Mat<Scalar> x, qkv_out, merged;
        std::vector<Mat<Scalar>> attn;  // per-head row-stochastic N x N
    };

    int head_dim() const { return dim / heads; }

    Mat<Scalar> forward(const Mat<Scalar>& x, Cache* cache = nullptr) const {
        const Eigen::Index n = x.cols();
        const int dh = head_dim();
        const Scalar scale = Scalar(1) / std::sqrt(Scalar(dh));
        Mat<Scalar> qkv_out = qkv.forward(x);
        Mat<Scalar> merged(dim, n);
        std::vector<Mat<Scalar>> attn_cache;
        for (int h = 0; h < heads; ++h) {
            auto q = qkv_out.middleRows(std::int64_t(h) * dh, dh);
            auto k = qkv_out.middleRows(std::int64_t(dim) + h * dh, dh);
            auto v = qkv_out.middleRows(std::int64_t(2) * dim + h * dh, dh);
            Mat<Scalar> scores = (q.transpose() * k) * scale;  // query rows
            Mat<Scalar> attn = softmax_rows(scores);
            merged.middleRows(std::int64_t(h) * dh, dh).noalias() = v * attn.transpose();
            if (cache) attn_cache.push_back(std::move(attn));
        }
        Mat<Scalar> y = out.forward(merged);
        if (cache) {
            cache->x = x;
            cache->qkv_out = std::move(qkv_out);
            cache->merged = std::move(merged);
            cache->attn = std::move(attn_cache);
        }
        return y;
    }

    Mat<Scalar> backward(const Cache& cache, const Mat<Scalar>& grad_y) {
        const int dh = head_dim();
        const Scalar scale = Scalar(1) / std::sqrt(Scalar(dh));
        Mat<Scalar> grad_merged = out.backward(cache.merged, grad_y);
        Mat<Scalar> grad_qkv(3 * dim, cache.x.cols());
        for (int h = 0; h < heads; ++h) {
            auto q = cache.qkv_out.middleRows(std::int64_t(h) * dh, dh);
            auto k = cache.qkv_out.middleRows(std::int64_t(dim) + h * dh, dh);
            auto v = cache.qkv_out.middleRows(std::int64_t(2) * dim + h * dh, dh);
            const Mat<Scalar>& attn = cache.attn[h];
            auto g_o = grad_merged.middleRows(std::int64_t(h) * dh, dh);

            Mat<Scalar> grad_attn = (v.transpose() * g_o).transpose();
            // softmax backward, row by row
            Mat<Scalar> grad_scores(attn.rows(), attn.cols());
            for (Eigen::Index i = 0; i < attn.rows(); ++i) {
                const Scalar dot = grad_attn.row(i).dot(attn.row(i));
                grad_scores.row(i) =
                    (attn.row(i).array() * (grad_attn.row(i).array() - dot)).matrix();
            }
            grad_scores *= scale;
            grad_qkv.middleRows(std::int64_t(h) * dh, dh).noalias() = k * grad_scores.transpose();
            grad_qkv.middleRows(std::int64_t(dim) + h * dh, dh).noalias() = q * grad_scores;
            grad_qkv.middleRows(std::int64_t(2) * dim + h * dh, dh).noalias() =
                g_o * cache.attn[h];
        }
        return qkv.backward(cache.x, grad_qkv);
    }

    void zero_grad() {
        qkv.zero_grad();
        out.zero_grad();
    }

    std::int64_t parameter_count() const { return qkv.parameter_count() + out.parameter_count(); }
};

/// Pre-LN transformer block: x += attn(ln1(x)); x += mlp(ln2(x)).
/// The MLP is Linear -> QuickGELU -> Linear.
template <typename Scalar>
struct TransformerBlock {
    int dim = 0;
    int mlp_dim = 0;
    LayerNorm<Scalar> ln1, ln2;
    MultiHeadAttention<Scalar> attn;
    Linear<Scalar> fc;    // mlp_dim x dim
    Linear<Scalar> proj;  // dim x mlp_dim

    struct Cache {
        Mat<Scalar> x_in, ln1_out, after_attn, ln2_out, fc_out;
        typename MultiHeadAttention<Scalar>::Cache attn_cache;
    };

    Mat<Scalar> forward(const Mat<Scalar>& x, Cache* cache = nullptr) const {
        Mat<Scalar> ln1_out = ln1.forward(x);
        Mat<Scalar> h = x + attn.forward(ln1_out, cache ? &cache->attn_cache : nullptr);
        Mat<Scalar> ln2_out = ln2.forward(h);
        Mat<Scalar> fc_out = fc.forward(ln2_out);
        Mat<Scalar> y = h + proj.forward(quick_gelu(fc_out));
        if (cache) {
            cache->x_in = x;
            cache->ln1_out = std::move(ln1_out);
            cache->after_attn = std::move(h);
            cache->ln2_out = std::move(ln2_out);
            cache->fc_out = std::move(fc_out);
        }
        return y;
    }

    Mat<Scalar> backward(const Cache& cache, const Mat<Scalar>& grad_y) {
        Mat<Scalar> grad_gelu = proj.backward(quick_gelu(cache.fc_out), grad_y);
        Mat<Scalar> grad_fc = quick_gelu_backward(cache.fc_out, grad_gelu);
        Mat<Scalar> grad_h = grad_y + ln2.backward(cache.after_attn, fc.backward(cache.ln2_out, grad_fc));
        Mat<Scalar> grad_attn_in = attn.backward(cache.attn_cache, grad_h);
        return grad_h + ln1.backward(cache.x_in, grad_attn_in);
    }

    void zero_grad() {
        ln1.zero_grad();
        ln2.zero_grad();
        attn.zero_grad();
        fc.zero_grad();
        proj.zero_grad();
    }

    std::int64_t parameter_count() const {
        return ln1.parameter_count() + ln2.parameter_count() + attn.parameter_count() +
               fc.parameter_count() + proj.parameter_count();
    }
};

}  // namespace maniloc::nn
