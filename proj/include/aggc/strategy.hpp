#pragma once

#include <memory>
#include <span>
#include <vector>

#include "aggc/baseline.hpp"
#include "aggc/clipper.hpp"
#include "aggc/types.hpp"

namespace aggc {

// Uniform interface over the clipping strategies the harness can swap by
// config key: "none" | "global" | "static_group" | "aggc". step() regulates
// the views in place and returns one decision per group, in partition order.
class ClipStrategy {
public:
    virtual ~ClipStrategy() = default;
    virtual std::vector<ClipDecision> step(std::span<GradientView> views,
                                           const StepContext& ctx) = 0;
    // Non-null for the adaptive strategy; lets the harness snapshot EMA state.
    virtual const AggcClipper* clipper() const { return nullptr; }
};

class NoneStrategy final : public ClipStrategy {
public:
    std::vector<ClipDecision> step(std::span<GradientView> views, const StepContext&) override {
        std::vector<ClipDecision> decisions;
        decisions.reserve(views.size());
        for (auto& view : views) {
            ClipDecision decision;
            decision.group_id = view.group_id;
            decision.pre_norm = group_norm_cached(view);
            decisions.push_back(std::move(decision));
        }
        return decisions;
    }
};

// Wraps global_clip: the single whole-model decision is expanded to one row
// per group so telemetry stays comparable across strategies. Every group
// carries the same factor; that shared scaling is the spill-over effect.
class GlobalStrategy final : public ClipStrategy {
public:
    explicit GlobalStrategy(GlobalClipConfig config) : config_(config) { config_.validate(); }

    std::vector<ClipDecision> step(std::span<GradientView> views, const StepContext&) override {
        std::vector<double> pre_norms;
        pre_norms.reserve(views.size());
        for (auto& view : views) pre_norms.push_back(group_norm_cached(view));

        const ClipDecision total = global_clip(views, config_);
        std::vector<ClipDecision> decisions;
        decisions.reserve(views.size());
        for (std::size_t j = 0; j < views.size(); ++j) {
            ClipDecision decision;
            decision.group_id = views[j].group_id;
            decision.pre_norm = pre_norms[j];
            decision.scale_factor = total.scale_factor;
            decision.action = total.action;
            decision.interval = total.interval;
            decisions.push_back(std::move(decision));
        }
        return decisions;
    }

private:
    GlobalClipConfig config_;
};

class StaticGroupStrategy final : public ClipStrategy {
public:
    explicit StaticGroupStrategy(StaticGroupClipConfig config) : config_(std::move(config)) {
        config_.validate();
    }

    std::vector<ClipDecision> step(std::span<GradientView> views, const StepContext&) override {
        return static_group_clip(views, config_);
    }

private:
    StaticGroupClipConfig config_;
};

class AggcStrategy final : public ClipStrategy {
public:
    AggcStrategy(AggcConfig config, const GroupPartition& partition)
        : clipper_(std::move(config), partition) {}

    std::vector<ClipDecision> step(std::span<GradientView> views, const StepContext& ctx) override {
        return clipper_.step(views, ctx);
    }

    const AggcClipper* clipper() const override { return &clipper_; }
    AggcClipper& mutable_clipper() { return clipper_; }

private:
    AggcClipper clipper_;
};

}  // namespace aggc
