#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "maniloc/errors.hpp"

namespace maniloc {

enum class LossKind { pixel_bce, image_bce };

/// Optimization settings. The learning-rate schedule (initial 1e-3, reduce
/// x0.1 on a 5-epoch validation plateau, stop once the rate would fall under
/// 1e-6) is fixed by the experimental protocol; batch size and the epoch cap
/// are local defaults.
struct TrainConfig {
    double initial_lr = 1e-3;
    double plateau_factor = 0.1;
    int plateau_patience = 5;
    double stop_lr = 1e-6;
    double improvement_tolerance = 1e-4;
    int batch_size = 32;
    int max_epochs = 300;
    std::uint64_t seed = 0;
    LossKind loss = LossKind::pixel_bce;

    void validate() const {
        if (!(stop_lr < initial_lr))
            throw ValidationError(ValidationCode::invalid_argument, "stop_lr must be < initial_lr");
        if (plateau_patience < 1)
            throw ValidationError(ValidationCode::invalid_argument, "patience must be >= 1");
        if (batch_size < 1)
            throw ValidationError(ValidationCode::invalid_argument, "batch_size must be >= 1");
    }
};

/// Mutable schedule state carried across epochs. The learning rate only ever
/// moves through {initial_lr * factor^k}; once a reduction would cross
/// stop_lr the schedule raises the stop flag instead of reducing further.
struct TrainState {
    int epoch = 0;
    double current_lr = 0;
    double best_val_loss = std::numeric_limits<double>::infinity();
    int epochs_since_improvement = 0;
    int reductions = 0;
    bool stop = false;
};

inline TrainState make_train_state(const TrainConfig& config) {
    TrainState s;
    s.current_lr = config.initial_lr;
    return s;
}

/// Reduce-on-plateau step, applied once per epoch after validation.
/// An epoch "improves" when val_loss < best - tolerance; a run of more than
/// `patience` non-improving epochs triggers one x`factor` reduction.
inline TrainState lr_schedule_step(TrainState state, double val_loss, const TrainConfig& config) {
    if (!std::isfinite(val_loss))
        throw RuntimeFailure("lr schedule: non-finite validation loss");
    ++state.epoch;
    if (val_loss < state.best_val_loss - config.improvement_tolerance) {
        state.best_val_loss = val_loss;
        state.epochs_since_improvement = 0;
        return state;
    }
    ++state.epochs_since_improvement;
    if (state.epochs_since_improvement > config.plateau_patience) {
        const double reduced = state.current_lr * config.plateau_factor;
        if (reduced < config.stop_lr) {
            state.stop = true;
        } else {
            state.current_lr = reduced;
            ++state.reductions;
        }
        state.epochs_since_improvement = 0;
    }
    return state;
}

}  // namespace maniloc
