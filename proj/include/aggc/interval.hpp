#pragma once

#include <algorithm>
#include <cmath>

#include "aggc/error.hpp"
#include "aggc/schedule.hpp"
#include "aggc/types.hpp"

namespace aggc {

// Full configuration of the adaptive clipper: EMA decay, safety floor for the
// lower bound, the epsilon of the rescaling denominator, and one schedule per
// bound coefficient.
struct AggcConfig {
    double beta = 0.95;
    double min_norm = 1e-8;
    double epsilon = 1e-6;
    ScheduleConfig low_schedule{0.5, 0.8, 0.1, 0.6, false};
    ScheduleConfig high_schedule{2.0, 1.2, 0.1, 0.6, false};

    void validate() const {
        if (!(beta >= 0.0 && beta < 1.0)) throw ConfigError("aggc: beta must lie in [0, 1)");
        if (!(min_norm >= 0.0)) throw ConfigError("aggc: min_norm must be >= 0");
        if (!(epsilon > 0.0)) throw ConfigError("aggc: epsilon must be positive");
        low_schedule.validate();
        high_schedule.validate();
        // Both schedules are monotone linear, so endpoint dominance implies
        // alpha_low < alpha_high at every step of a shared timeline.
        if (!(low_schedule.alpha_init < high_schedule.alpha_init))
            throw ConfigError("aggc: alpha_low init must be < alpha_high init");
        if (!(low_schedule.effective_late() < high_schedule.effective_late()))
            throw ConfigError("aggc: alpha_low late must be < alpha_high late");
    }
};

// Admissible interval [lower, upper] for one group at one step, together with
// the coefficients that produced it.
struct ClipInterval {
    double lower = 0.0;
    double upper = 0.0;
    double alpha_low = 0.0;
    double alpha_high = 0.0;
};

// lower = max(min_norm, alpha_low * S), upper = alpha_high * S. When min_norm
// exceeds the upper bound, the interval collapses to the floor: the safety
// floor dominates.
inline ClipInterval compute_interval(const AggcConfig& cfg, double ema_scale,
                                     const StepContext& ctx) {
    if (!(std::isfinite(ema_scale) && ema_scale >= 0.0))
        throw ConfigError("compute_interval: EMA scale must be finite and nonnegative");
    ClipInterval interval;
    interval.alpha_low = schedule_alpha(cfg.low_schedule, ctx);
    interval.alpha_high = schedule_alpha(cfg.high_schedule, ctx);
    interval.lower = std::max(cfg.min_norm, interval.alpha_low * ema_scale);
    interval.upper = std::max(interval.alpha_high * ema_scale, interval.lower);
    return interval;
}

}  // namespace aggc
