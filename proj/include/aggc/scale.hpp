#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "aggc/error.hpp"
#include "aggc/interval.hpp"
#include "aggc/types.hpp"

namespace aggc {

enum class ClipAction {
    kNone,         // norm inside the interval; gradients untouched
    kClippedHigh,  // norm above the upper bound; scaled down
    kBoostedLow,   // norm below the lower bound; scaled up
};

std::string_view to_string(ClipAction action);
ClipAction clip_action_from_string(std::string_view name);

// Outcome of regulating one group at one step.
// Invariants: action == kNone iff scale_factor == 1.0 exactly;
// kClippedHigh implies scale_factor < 1; kBoostedLow implies scale_factor > 1.
struct ClipDecision {
    std::string group_id;
    double pre_norm = 0.0;
    double scale_factor = 1.0;
    ClipAction action = ClipAction::kNone;
    ClipInterval interval;
};

// Multiplicative factor bringing an out-of-interval norm to the nearest
// boundary: upper/(norm+eps) above, lower/(norm+eps) below, 1 inside.
// Two guards keep the decision invariants intact:
//  - a norm below eps is never boosted (a scalar multiple of a near-zero
//    vector cannot create a direction), so the action is kNone;
//  - a norm within eps below the lower bound would "boost" by a factor <= 1;
//    it is treated as in-interval instead.
inline ClipDecision compute_scale(std::string group_id, double norm, const ClipInterval& interval,
                                  double epsilon) {
    if (!(std::isfinite(norm) && norm >= 0.0))
        throw ConfigError("compute_scale: norm must be finite and nonnegative");
    ClipDecision decision;
    decision.group_id = std::move(group_id);
    decision.pre_norm = norm;
    decision.interval = interval;
    if (norm > interval.upper) {
        decision.scale_factor = interval.upper / (norm + epsilon);
        decision.action = ClipAction::kClippedHigh;
    } else if (norm < interval.lower && norm >= epsilon) {
        const double factor = interval.lower / (norm + epsilon);
        if (factor > 1.0) {
            decision.scale_factor = factor;
            decision.action = ClipAction::kBoostedLow;
        }
    }
    return decision;
}

// Applies the decision's factor uniformly to every buffer in the group.
// kNone leaves the buffers untouched (a genuine no-op, not a multiply by 1).
template <typename Scalar>
void apply_scale(GradientViewT<Scalar>& view, const ClipDecision& decision) {
    if (decision.action == ClipAction::kNone) return;
    const auto factor = static_cast<Scalar>(decision.scale_factor);
    for (auto& tensor : view.tensors) tensor *= factor;
    if (view.cached_norm) view.cached_norm = *view.cached_norm * decision.scale_factor;
}

}  // namespace aggc
