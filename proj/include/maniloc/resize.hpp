#pragma once

#include <algorithm>
#include <cmath>

#include "maniloc/errors.hpp"
#include "maniloc/types.hpp"

namespace maniloc {

/// Nearest-neighbor index rule used for mask resizing:
/// src = floor(dst * src_size / dst_size), computed in integer arithmetic.
inline int nearest_source_index(int dst_index, int src_size, int dst_size) {
    return int((std::int64_t(dst_index) * src_size) / dst_size);
}

/// Nearest-neighbor resize; the only resize ever applied to binary masks so
/// that values stay in {0,1}.
inline MaskGrid resize_nearest(const MaskGrid& src, int out_h, int out_w) {
    if (src.height <= 0 || src.width <= 0 || out_h <= 0 || out_w <= 0)
        throw ValidationError(ValidationCode::invalid_argument, "resize_nearest: non-positive size");
    MaskGrid out(out_h, out_w);
    for (int y = 0; y < out_h; ++y) {
        const int sy = nearest_source_index(y, src.height, out_h);
        for (int x = 0; x < out_w; ++x) {
            const int sx = nearest_source_index(x, src.width, out_w);
            out.values(y, x) = src.values(sy, sx);
        }
    }
    return out;
}

namespace detail {

struct LinearTap {
    int lo, hi;
    float w_hi;  // weight of hi sample; lo gets 1 - w_hi
};

/// Half-pixel-center sampling with edge clamping; preserves constants.
inline LinearTap linear_tap(int dst_index, int src_size, int dst_size) {
    const double pos = (dst_index + 0.5) * double(src_size) / dst_size - 0.5;
    const double clamped = std::clamp(pos, 0.0, double(src_size - 1));
    const int lo = int(std::floor(clamped));
    const int hi = std::min(lo + 1, src_size - 1);
    return {lo, hi, float(clamped - lo)};
}

}  // namespace detail

/// Bilinear resize of a channels-fastest grid. Shared by image preprocessing,
/// dual-backbone grid alignment and decoder upsampling stages.
template <typename Scalar>
Grid<Scalar> resize_bilinear(const Grid<Scalar>& src, int out_h, int out_w) {
    if (src.height <= 0 || src.width <= 0 || out_h <= 0 || out_w <= 0)
        throw ValidationError(ValidationCode::invalid_argument, "resize_bilinear: non-positive size");
    Grid<Scalar> out(out_h, out_w, src.channels);
    std::vector<detail::LinearTap> col_taps(out_w);
    for (int x = 0; x < out_w; ++x) col_taps[x] = detail::linear_tap(x, src.width, out_w);
    for (int y = 0; y < out_h; ++y) {
        const auto ty = detail::linear_tap(y, src.height, out_h);
        const Scalar wy = Scalar(ty.w_hi);
        for (int x = 0; x < out_w; ++x) {
            const auto& tx = col_taps[x];
            const Scalar wx = Scalar(tx.w_hi);
            const std::int64_t i00 = std::int64_t(ty.lo) * src.width + tx.lo;
            const std::int64_t i01 = std::int64_t(ty.lo) * src.width + tx.hi;
            const std::int64_t i10 = std::int64_t(ty.hi) * src.width + tx.lo;
            const std::int64_t i11 = std::int64_t(ty.hi) * src.width + tx.hi;
            out.data.col(std::int64_t(y) * out_w + x) =
                (1 - wy) * ((1 - wx) * src.data.col(i00) + wx * src.data.col(i01)) +
                wy * ((1 - wx) * src.data.col(i10) + wx * src.data.col(i11));
        }
    }
    return out;
}

/// Adjoint of resize_bilinear: scatters output-space gradients back onto the
/// source grid with the same taps. Needed to train through upsampling stages.
template <typename Scalar>
Grid<Scalar> resize_bilinear_adjoint(const Grid<Scalar>& grad_out, int src_h, int src_w) {
    Grid<Scalar> grad_src(src_h, src_w, grad_out.channels);
    grad_src.data.setZero();
    std::vector<detail::LinearTap> col_taps(grad_out.width);
    for (int x = 0; x < grad_out.width; ++x)
        col_taps[x] = detail::linear_tap(x, src_w, grad_out.width);
    for (int y = 0; y < grad_out.height; ++y) {
        const auto ty = detail::linear_tap(y, src_h, grad_out.height);
        const Scalar wy = Scalar(ty.w_hi);
        for (int x = 0; x < grad_out.width; ++x) {
            const auto& tx = col_taps[x];
            const Scalar wx = Scalar(tx.w_hi);
            const auto g = grad_out.data.col(std::int64_t(y) * grad_out.width + x);
            grad_src.data.col(std::int64_t(ty.lo) * src_w + tx.lo) += (1 - wy) * (1 - wx) * g;
            grad_src.data.col(std::int64_t(ty.lo) * src_w + tx.hi) += (1 - wy) * wx * g;
            grad_src.data.col(std::int64_t(ty.hi) * src_w + tx.lo) += wy * (1 - wx) * g;
            grad_src.data.col(std::int64_t(ty.hi) * src_w + tx.hi) += wy * wx * g;
        }
    }
    return grad_src;
}

}  // namespace maniloc
