#pragma once

#include <cmath>
#include <vector>

#include "maniloc/nn.hpp"

namespace maniloc::nn {

/// Adam with bias correction; beta/epsilon defaults are the conventional
/// ones and are recorded in checkpoint metadata by the trainer.
template <typename Scalar>
class Adam {
public:
    Scalar beta1 = Scalar(0.9);
    Scalar beta2 = Scalar(0.999);
    Scalar eps = Scalar(1e-8);

    void step(const std::vector<ParamRef<Scalar>>& params,
              const std::vector<ParamRef<Scalar>>& grads, Scalar lr) {
        if (m_.empty()) {
            for (const auto& p : params) {
                m_.push_back(Vec<Scalar>::Zero(p.size));
                v_.push_back(Vec<Scalar>::Zero(p.size));
            }
        }
        ++t_;
        const Scalar bc1 = 1 - std::pow(beta1, Scalar(t_));
        const Scalar bc2 = 1 - std::pow(beta2, Scalar(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            Eigen::Map<Vec<Scalar>> p(params[i].data, params[i].size);
            Eigen::Map<const Vec<Scalar>> g(grads[i].data, grads[i].size);
            m_[i] = beta1 * m_[i] + (1 - beta1) * g;
            v_[i] = beta2 * v_[i] + (1 - beta2) * g.cwiseProduct(g);
            p.array() -=
                lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps);
        }
    }

    long step_count() const { return t_; }

private:
    long t_ = 0;
    std::vector<Vec<Scalar>> m_, v_;
};

}  // namespace maniloc::nn
