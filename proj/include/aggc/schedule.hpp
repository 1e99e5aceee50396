#pragma once

#include "aggc/error.hpp"
#include "aggc/types.hpp"

namespace aggc {

// Linear schedule for a bound coefficient: holds alpha_init until progress
// `onset`, interpolates to alpha_late over a window of width `window`, then
// holds alpha_late. With `constant` set, evaluates to alpha_init everywhere
// (the static-bounds ablation switch).
struct ScheduleConfig {
    double alpha_init = 1.0;
    double alpha_late = 1.0;
    double onset = 0.1;
    double window = 0.6;
    bool constant = false;

    void validate() const {
        if (!(alpha_init > 0.0)) throw ConfigError("schedule: alpha_init must be positive");
        if (!(alpha_late > 0.0)) throw ConfigError("schedule: alpha_late must be positive");
        if (onset < 0.0) throw ConfigError("schedule: onset must be >= 0");
        if (!(window > 0.0)) throw ConfigError("schedule: window must be positive");
        if (onset + window > 1.0) throw ConfigError("schedule: onset + window must be <= 1");
    }

    // Value at the end of the run; alpha_init when constant.
    double effective_late() const { return constant ? alpha_init : alpha_late; }
};

inline double schedule_alpha(const ScheduleConfig& cfg, double progress) {
    if (cfg.constant || progress <= cfg.onset) return cfg.alpha_init;
    if (progress >= cfg.onset + cfg.window) return cfg.alpha_late;
    const double lambda = (progress - cfg.onset) / cfg.window;
    return (1.0 - lambda) * cfg.alpha_init + lambda * cfg.alpha_late;
}

inline double schedule_alpha(const ScheduleConfig& cfg, const StepContext& ctx) {
    return schedule_alpha(cfg, ctx.progress());
}

}  // namespace aggc
