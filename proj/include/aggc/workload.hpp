#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "aggc/strategy.hpp"
#include "aggc/types.hpp"

namespace aggc {

struct SpikeEvent {
    std::int64_t step = 0;
    double multiplier = 1.0;
};

// Parameterizes one group's synthetic gradient-norm trajectory:
//   norm(t) = base_norm * drift^t * lognormal(noise_sigma) * spike(t).
struct GroupStreamSpec {
    std::string group_id;
    double base_norm = 1.0;
    double noise_sigma = 0.0;
    double drift = 1.0;
    std::vector<SpikeEvent> spikes;
    int tensor_count = 2;
    Eigen::Index tensor_dim = 32;

    void validate() const;

    // Deterministic part of the target norm (noise factor excluded).
    double envelope(std::int64_t step) const;
};

// Generates per-step gradient views with prescribed norms and uniformly random
// directions. Pure function of (specs, seed, step): streams can be replayed or
// sampled out of order, and a fixed seed reproduces them bit for bit.
class SyntheticStream {
public:
    SyntheticStream(std::vector<GroupStreamSpec> specs, std::uint64_t seed);

    const std::vector<GroupStreamSpec>& specs() const { return specs_; }
    GroupPartition partition() const;

    // Fills the internal buffers for `step` and returns views aliasing them.
    std::vector<GradientView> generate_step(std::int64_t step);

    // Target norm including the noise factor; what generate_step realizes.
    double target_norm(std::size_t group_index, std::int64_t step) const;

private:
    std::vector<GroupStreamSpec> specs_;
    std::uint64_t seed_;
    std::vector<std::vector<Eigen::VectorXd>> buffers_;
};

// Paired per-group scale traces from running one strategy over a spiked
// stream, plus the summary the spill-over contrast hinges on: the scale
// factors applied to non-spiked groups at spike steps.
struct SpilloverReport {
    std::vector<std::string> group_ids;
    Eigen::MatrixXd scale_factors;  // steps x groups
    Eigen::MatrixXd pre_norms;      // steps x groups
    Eigen::MatrixXd post_norms;     // steps x groups
    std::vector<std::int64_t> spike_steps;

    // Mean applied scale at spike steps, per group id.
    std::map<std::string, double> scale_at_spikes;
};

SpilloverReport spillover_experiment(ClipStrategy& strategy, std::vector<GroupStreamSpec> specs,
                                     std::int64_t steps, std::uint64_t seed);

}  // namespace aggc
