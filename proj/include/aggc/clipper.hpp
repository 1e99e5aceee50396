#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aggc/ema.hpp"
#include "aggc/group_norm.hpp"
#include "aggc/interval.hpp"
#include "aggc/scale.hpp"
#include "aggc/types.hpp"

namespace aggc {

// Stateful adaptive group-wise clipper, applied between the backward pass and
// the optimizer step. Per group and step: group norm -> EMA update (on the
// pre-clip norm) -> admissible interval -> scale factor -> in-place rescale.
//
// Single logical writer per step; step() is not reentrant. Per-group work
// within one step carries no cross-group dependency.
class AggcClipper {
public:
    AggcClipper(AggcConfig config, const GroupPartition& partition)
        : config_(std::move(config)), ema_(make_state(config_, partition)) {}

    const AggcConfig& config() const { return config_; }
    const EmaScaleState& ema() const { return ema_; }
    std::optional<std::int64_t> last_step() const { return last_step_; }

    // Runs one clipping step over all groups, in partition order. Views must
    // match the partition one-to-one. The step index must advance by exactly
    // one between consecutive calls. Returns one decision per group.
    template <typename Scalar>
    std::vector<ClipDecision> step(std::span<GradientViewT<Scalar>> views, const StepContext& ctx) {
        if (static_cast<Eigen::Index>(views.size()) != ema_.group_count())
            throw ConfigError("aggc_step: expected one view per partition group");
        for (Eigen::Index j = 0; j < ema_.group_count(); ++j) {
            if (views[static_cast<std::size_t>(j)].group_id != ema_.group_ids()[static_cast<std::size_t>(j)])
                throw ConfigError("aggc_step: view order does not match the partition");
        }
        if (last_step_ && ctx.t != *last_step_ + 1)
            throw StepOutOfOrderError("aggc_step: step " + std::to_string(ctx.t) +
                                      " does not follow step " + std::to_string(*last_step_));

        // Norms first: a non-finite gradient anywhere aborts the step before
        // any EMA state or buffer is touched.
        std::vector<double> norms(views.size());
        for (std::size_t j = 0; j < views.size(); ++j) norms[j] = group_norm_cached(views[j]);

        std::vector<ClipDecision> decisions;
        decisions.reserve(views.size());
        for (std::size_t j = 0; j < views.size(); ++j) {
            const double scale = ema_update(ema_, static_cast<Eigen::Index>(j), norms[j]);
            const ClipInterval interval = compute_interval(config_, scale, ctx);
            ClipDecision decision =
                compute_scale(views[j].group_id, norms[j], interval, config_.epsilon);
            apply_scale(views[j], decision);
            decisions.push_back(std::move(decision));
        }
        last_step_ = ctx.t;
        return decisions;
    }

    // Snapshot restore hooks; serialization lives in the telemetry module.
    void restore_group(Eigen::Index group, double scale, bool initialized) {
        ema_.restore(group, scale, initialized);
    }
    void restore_step(std::optional<std::int64_t> step) { last_step_ = step; }

private:
    static EmaScaleState make_state(const AggcConfig& config, const GroupPartition& partition) {
        config.validate();
        partition.validate();
        std::vector<std::string> ids;
        ids.reserve(partition.groups.size());
        for (const auto& group : partition.groups) ids.push_back(group.id);
        return EmaScaleState(config.beta, std::move(ids));
    }

    AggcConfig config_;
    EmaScaleState ema_;
    std::optional<std::int64_t> last_step_;
};

}  // namespace aggc
