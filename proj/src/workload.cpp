#include "aggc/workload.hpp"

#include <cmath>
#include <random>
#include <set>

#include "aggc/error.hpp"

namespace aggc {

namespace {

std::uint64_t mix(std::uint64_t seed, std::uint64_t lane, std::uint64_t step) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (lane + 1) + 0xbf58476d1ce4e5b9ULL * (step + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

void GroupStreamSpec::validate() const {
    if (group_id.empty()) throw ConfigError("stream spec: group_id must be nonempty");
    if (!(base_norm > 0.0)) throw ConfigError("stream spec: base_norm must be positive");
    if (!(noise_sigma >= 0.0)) throw ConfigError("stream spec: noise_sigma must be >= 0");
    if (!(drift > 0.0)) throw ConfigError("stream spec: drift must be positive");
    for (const auto& spike : spikes) {
        if (!(spike.multiplier >= 1.0))
            throw ConfigError("stream spec: spike multiplier must be >= 1");
        if (spike.step < 0) throw ConfigError("stream spec: spike step must be >= 0");
    }
    if (tensor_count < 1 || tensor_dim < 1)
        throw ConfigError("stream spec: need at least one tensor of dim >= 1");
}

double GroupStreamSpec::envelope(std::int64_t step) const {
    double value = base_norm * std::pow(drift, static_cast<double>(step));
    for (const auto& spike : spikes) {
        if (spike.step == step) value *= spike.multiplier;
    }
    return value;
}

SyntheticStream::SyntheticStream(std::vector<GroupStreamSpec> specs, std::uint64_t seed)
    : specs_(std::move(specs)), seed_(seed) {
    if (specs_.empty()) throw ConfigError("synthetic stream: need at least one group");
    std::set<std::string> ids;
    for (const auto& spec : specs_) {
        spec.validate();
        if (!ids.insert(spec.group_id).second)
            throw ConfigError("synthetic stream: duplicate group '" + spec.group_id + "'");
    }
    buffers_.resize(specs_.size());
    for (std::size_t g = 0; g < specs_.size(); ++g) {
        buffers_[g].assign(static_cast<std::size_t>(specs_[g].tensor_count),
                           Eigen::VectorXd::Zero(specs_[g].tensor_dim));
    }
}

GroupPartition SyntheticStream::partition() const {
    GroupPartition partition;
    for (const auto& spec : specs_) {
        GroupPartition::Group group;
        group.id = spec.group_id;
        for (int i = 0; i < spec.tensor_count; ++i)
            group.members.push_back(spec.group_id + ".g" + std::to_string(i));
        partition.groups.push_back(std::move(group));
    }
    return partition;
}

double SyntheticStream::target_norm(std::size_t group_index, std::int64_t step) const {
    const auto& spec = specs_[group_index];
    double target = spec.envelope(step);
    if (spec.noise_sigma > 0.0) {
        std::mt19937_64 rng(mix(seed_, group_index, static_cast<std::uint64_t>(step)));
        std::normal_distribution<double> normal(0.0, 1.0);
        target *= std::exp(spec.noise_sigma * normal(rng));
    }
    return target;
}

std::vector<GradientView> SyntheticStream::generate_step(std::int64_t step) {
    std::vector<GradientView> views;
    views.reserve(specs_.size());
    for (std::size_t g = 0; g < specs_.size(); ++g) {
        const auto& spec = specs_[g];
        const double target = target_norm(g, step);

        // One direction draw across the whole group, normalized then scaled,
        // so the group norm hits the target exactly. The direction generator
        // is seeded separately from the noise draw above.
        std::mt19937_64 rng(mix(seed_ ^ 0x5bf0363546d95a13ULL, g, static_cast<std::uint64_t>(step)));
        std::normal_distribution<double> normal(0.0, 1.0);
        double sum_sq = 0.0;
        for (auto& buffer : buffers_[g]) {
            for (Eigen::Index i = 0; i < buffer.size(); ++i) {
                buffer[i] = normal(rng);
                sum_sq += buffer[i] * buffer[i];
            }
        }
        const double scale = target / std::sqrt(sum_sq);
        for (auto& buffer : buffers_[g]) buffer *= scale;

        GradientView view;
        view.group_id = spec.group_id;
        for (std::size_t i = 0; i < buffers_[g].size(); ++i) {
            view.tensors.emplace_back(buffers_[g][i].data(), buffers_[g][i].size());
            view.tensor_ids.push_back(spec.group_id + ".g" + std::to_string(i));
        }
        views.push_back(std::move(view));
    }
    return views;
}

SpilloverReport spillover_experiment(ClipStrategy& strategy, std::vector<GroupStreamSpec> specs,
                                     std::int64_t steps, std::uint64_t seed) {
    if (specs.size() < 2)
        throw ConfigError("spillover experiment: need at least two groups");
    std::set<std::int64_t> spike_steps;
    for (const auto& spec : specs) {
        for (const auto& spike : spec.spikes) {
            if (spike.step < steps && spike.multiplier > 1.0) spike_steps.insert(spike.step);
        }
    }
    if (spike_steps.empty())
        throw ConfigError("spillover experiment: need at least one spiked group");

    SyntheticStream stream(specs, seed);
    SpilloverReport report;
    for (const auto& spec : specs) report.group_ids.push_back(spec.group_id);
    report.spike_steps.assign(spike_steps.begin(), spike_steps.end());
    const auto J = static_cast<Eigen::Index>(specs.size());
    report.scale_factors.resize(steps, J);
    report.pre_norms.resize(steps, J);
    report.post_norms.resize(steps, J);

    for (std::int64_t t = 0; t < steps; ++t) {
        auto views = stream.generate_step(t);
        const auto decisions =
            strategy.step(std::span<GradientView>(views), StepContext(t, steps));
        for (Eigen::Index j = 0; j < J; ++j) {
            const auto& d = decisions[static_cast<std::size_t>(j)];
            report.scale_factors(t, j) = d.scale_factor;
            report.pre_norms(t, j) = d.pre_norm;
            report.post_norms(t, j) = d.pre_norm * d.scale_factor;
        }
    }

    for (Eigen::Index j = 0; j < J; ++j) {
        double sum = 0.0;
        for (const auto t : report.spike_steps) sum += report.scale_factors(t, j);
        report.scale_at_spikes[report.group_ids[static_cast<std::size_t>(j)]] =
            sum / static_cast<double>(report.spike_steps.size());
    }
    return report;
}

}  // namespace aggc
