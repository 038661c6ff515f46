#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace maniloc {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatF = Mat<float>;
using VecF = Vec<float>;

/// Dense H x W x C block. Storage is channels-fastest: data(c, y * width + x).
/// Used both for backbone feature grids and for intermediate decoder
/// activations; FeatureGrid is the float instantiation.
template <typename Scalar>
struct Grid {
    int height = 0;
    int width = 0;
    int channels = 0;
    Mat<Scalar> data;  // channels x (height * width)

    Grid() = default;
    Grid(int h, int w, int c) : height(h), width(w), channels(c), data(c, std::int64_t(h) * w) {}

    std::int64_t locations() const { return std::int64_t(height) * width; }

    Scalar at(int y, int x, int c) const { return data(c, std::int64_t(y) * width + x); }
    Scalar& at(int y, int x, int c) { return data(c, std::int64_t(y) * width + x); }

    bool all_finite() const { return data.allFinite(); }

    template <typename Other>
    Grid<Other> cast() const {
        Grid<Other> out(height, width, channels);
        out.data = data.template cast<Other>();
        return out;
    }
};

using FeatureGrid = Grid<float>;

/// Binary ground-truth mask; values are strictly 0 or 1 (1 = manipulated).
struct MaskGrid {
    int height = 0;
    int width = 0;
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> values;  // height x width

    MaskGrid() = default;
    MaskGrid(int h, int w) : height(h), width(w), values(h, w) { values.setZero(); }

    std::int64_t positive_count() const { return (values.array() != 0).count(); }
};

/// Per-pixel manipulation probability, every value finite and in [0, 1].
struct PredictionMap {
    int height = 0;
    int width = 0;
    MatF values;  // height x width

    PredictionMap() = default;
    PredictionMap(int h, int w) : height(h), width(w), values(h, w) { values.setZero(); }
};

}  // namespace maniloc
