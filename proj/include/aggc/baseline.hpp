#pragma once

#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "aggc/error.hpp"
#include "aggc/group_norm.hpp"
#include "aggc/scale.hpp"
#include "aggc/types.hpp"

namespace aggc {

// Conventional global norm clipping: one L2 norm over all parameters, one
// threshold, one scalar applied to everything.
struct GlobalClipConfig {
    double max_norm = 10.0;
    double epsilon = 1e-6;

    void validate() const {
        if (!(max_norm > 0.0)) throw ConfigError("global clip: max_norm must be positive");
        if (!(epsilon > 0.0)) throw ConfigError("global clip: epsilon must be positive");
    }
};

// Fixed per-group upper thresholds; no lower bound, no history.
struct StaticGroupClipConfig {
    std::map<std::string, double> max_norms;
    double epsilon = 1e-6;

    void validate() const {
        for (const auto& [group_id, max_norm] : max_norms) {
            if (!(max_norm > 0.0))
                throw ConfigError("static clip: max_norm for group '" + group_id +
                                  "' must be positive");
        }
        if (!(epsilon > 0.0)) throw ConfigError("static clip: epsilon must be positive");
    }
};

// Clips the whole model by its total norm. Returns a single decision for the
// synthetic group "ALL"; the factor, when it fires, is applied to every tensor
// of every view.
template <typename Scalar>
ClipDecision global_clip(std::span<GradientViewT<Scalar>> views, const GlobalClipConfig& cfg) {
    double sum_sq = 0.0;
    for (auto& view : views) {
        const double norm = group_norm_cached(view);
        sum_sq += norm * norm;
    }
    const double total_norm = std::sqrt(sum_sq);

    ClipDecision decision;
    decision.group_id = "ALL";
    decision.pre_norm = total_norm;
    decision.interval = ClipInterval{0.0, cfg.max_norm, 0.0, 0.0};
    if (total_norm > cfg.max_norm) {
        decision.scale_factor = cfg.max_norm / (total_norm + cfg.epsilon);
        decision.action = ClipAction::kClippedHigh;
        for (auto& view : views) apply_scale(view, decision);
    }
    return decision;
}

// Upper-only clip of each group at its configured threshold.
template <typename Scalar>
std::vector<ClipDecision> static_group_clip(std::span<GradientViewT<Scalar>> views,
                                            const StaticGroupClipConfig& cfg) {
    std::vector<ClipDecision> decisions;
    decisions.reserve(views.size());
    for (auto& view : views) {
        const auto it = cfg.max_norms.find(view.group_id);
        if (it == cfg.max_norms.end()) throw MissingGroupThresholdError(view.group_id);
        const double max_norm = it->second;
        const double norm = group_norm_cached(view);

        ClipDecision decision;
        decision.group_id = view.group_id;
        decision.pre_norm = norm;
        decision.interval = ClipInterval{0.0, max_norm, 0.0, 0.0};
        if (norm > max_norm) {
            decision.scale_factor = max_norm / (norm + cfg.epsilon);
            decision.action = ClipAction::kClippedHigh;
            apply_scale(view, decision);
        }
        decisions.push_back(std::move(decision));
    }
    return decisions;
}

}  // namespace aggc
