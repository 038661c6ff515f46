#pragma once

#include <cmath>
#include <vector>

#include "maniloc/errors.hpp"
#include "maniloc/nn.hpp"
#include "maniloc/types.hpp"

namespace maniloc {

/// Numerically stable per-element binary cross-entropy on logits:
/// max(z, 0) - z*y + log(1 + exp(-|z|)).
template <typename Scalar>
Scalar bce_with_logits(Scalar logit, Scalar target) {
    return std::max(logit, Scalar(0)) - logit * target + std::log1p(std::exp(-std::abs(logit)));
}

/// Mean pixel BCE over a batch of logit maps (1-channel grids) against
/// binary masks of the same size. Also writes dL/dz when grad is non-null.
template <typename Scalar>
Scalar pixel_bce_loss(const std::vector<Grid<Scalar>>& logits, const std::vector<MaskGrid>& masks,
                      std::vector<Grid<Scalar>>* grad = nullptr) {
    if (logits.size() != masks.size())
        throw ValidationError(ValidationCode::dimension_mismatch, "pixel BCE: batch size mismatch");
    std::int64_t n = 0;
    for (std::size_t b = 0; b < logits.size(); ++b) {
        if (logits[b].channels != 1 || logits[b].height != masks[b].height ||
            logits[b].width != masks[b].width)
            throw ValidationError(ValidationCode::dimension_mismatch, "pixel BCE: shape mismatch");
        n += logits[b].locations();
    }
    if (grad) grad->resize(logits.size());
    long double total = 0;
    for (std::size_t b = 0; b < logits.size(); ++b) {
        const auto& g = logits[b];
        if (grad) (*grad)[b] = Grid<Scalar>(g.height, g.width, 1);
        for (int y = 0; y < g.height; ++y)
            for (int x = 0; x < g.width; ++x) {
                const Scalar z = g.at(y, x, 0);
                const Scalar t = Scalar(masks[b].values(y, x));
                total += bce_with_logits(z, t);
                if (grad) (*grad)[b].at(y, x, 0) = (nn::sigmoid(z) - t) / Scalar(n);
            }
    }
    return Scalar(total / n);
}

/// Mean image-level BCE for the detection probe; scores are logits, one per
/// image, targets in {0,1}.
template <typename Scalar>
Scalar image_bce_loss(const Vec<Scalar>& logits, const Vec<Scalar>& targets,
                      Vec<Scalar>* grad = nullptr) {
    if (logits.size() != targets.size())
        throw ValidationError(ValidationCode::dimension_mismatch, "image BCE: size mismatch");
    const auto n = logits.size();
    if (grad) grad->resize(n);
    long double total = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        total += bce_with_logits(logits[i], targets[i]);
        if (grad) (*grad)[i] = (nn::sigmoid(logits[i]) - targets[i]) / Scalar(n);
    }
    return Scalar(total / n);
}

}  // namespace maniloc
