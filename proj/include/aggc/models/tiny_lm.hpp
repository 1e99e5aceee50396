#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "aggc/registry.hpp"

namespace aggc {

struct TinyLmConfig {
    Eigen::Index vocab = 64;
    Eigen::Index d_model = 32;
    Eigen::Index n_heads = 2;
    Eigen::Index d_ff = 64;
    std::vector<bool> head_mask;  // empty = all heads active
    std::uint64_t seed = 0;

    void validate() const;
};

// Single-block decoder-only character LM with a hand-derived backward pass:
// embedding -> pre-LN causal multi-head attention (q/k/v/o projections)
// -> pre-LN gated feed-forward (gate/up/down, silu) -> output head.
// Parameter names follow the default grouping taxonomy, so per-module-type
// gradient traces fall out of the registry partition directly.
class TinyLmModel {
public:
    TinyLmModel(TinyLmConfig config, ParamRegistry& registry);
    TinyLmModel(TinyLmModel&&) noexcept;
    TinyLmModel& operator=(TinyLmModel&&) noexcept;
    ~TinyLmModel();

    const TinyLmConfig& config() const { return config_; }

    // tokens: batch x (L+1); positions 0..L-1 are inputs, 1..L the targets.
    // Returns the mean next-token cross-entropy in nats.
    double forward(const Eigen::MatrixXi& tokens);

    // Analytic gradients for the batch of the preceding forward call,
    // written into the registry.
    void backward(const Eigen::MatrixXi& tokens);

private:
    struct SequenceCache;

    void check_tokens(const Eigen::MatrixXi& tokens) const;

    TinyLmConfig config_;
    ParamRegistry* registry_;
    std::vector<SequenceCache> cache_;
    std::optional<Eigen::MatrixXi> cached_tokens_;
};

}  // namespace aggc
