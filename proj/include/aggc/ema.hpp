#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "aggc/error.hpp"

namespace aggc {

// Per-group smoothed gradient scale S_j, updated as
//   S_j <- beta * S_j + (1 - beta) * norm.
// The first observed norm of a group initializes S_j directly (no warm-up
// bias, no correction term).
class EmaScaleState {
public:
    EmaScaleState(double beta, std::vector<std::string> group_ids)
        : beta_(beta),
          group_ids_(std::move(group_ids)),
          scales_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(group_ids_.size()))),
          initialized_(group_ids_.size(), false) {
        if (!(beta >= 0.0 && beta < 1.0))
            throw ConfigError("ema: beta must lie in [0, 1)");
        if (group_ids_.empty()) throw ConfigError("ema: need at least one group");
    }

    double beta() const { return beta_; }
    Eigen::Index group_count() const { return scales_.size(); }
    const std::vector<std::string>& group_ids() const { return group_ids_; }

    double scale(Eigen::Index group) const { return scales_[group]; }
    bool is_initialized(Eigen::Index group) const { return initialized_[static_cast<std::size_t>(group)]; }

    // Restores a snapshot entry. Used when resuming from a serialized state.
    void restore(Eigen::Index group, double scale, bool initialized) {
        if (!std::isfinite(scale) || scale < 0.0)
            throw ConfigError("ema: restored scale must be finite and nonnegative");
        scales_[group] = scale;
        initialized_[static_cast<std::size_t>(group)] = initialized;
    }

private:
    double beta_;
    std::vector<std::string> group_ids_;
    Eigen::VectorXd scales_;
    std::vector<bool> initialized_;

    friend double ema_update(EmaScaleState& state, Eigen::Index group, double norm);
};

// Folds one observed group norm into the state and returns the new S_j.
inline double ema_update(EmaScaleState& state, Eigen::Index group, double norm) {
    if (!(std::isfinite(norm) && norm >= 0.0))
        throw ConfigError("ema_update: norm must be finite and nonnegative");
    auto& scale = state.scales_[group];
    if (!state.initialized_[static_cast<std::size_t>(group)]) {
        scale = norm;
        state.initialized_[static_cast<std::size_t>(group)] = true;
    } else {
        scale = state.beta_ * scale + (1.0 - state.beta_) * norm;
    }
    return scale;
}

}  // namespace aggc
