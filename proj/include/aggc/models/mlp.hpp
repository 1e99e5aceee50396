#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "aggc/registry.hpp"

namespace aggc {

struct MlpConfig {
    std::vector<Eigen::Index> layer_sizes = {8, 32, 32, 4};
    std::uint64_t seed = 0;
};

// Fully-connected tanh regressor with a hand-derived backward pass. Parameters
// live in the registry ("layers.<i>.weight" / "layers.<i>.bias"); backward
// writes analytic gradients into the registry's buffers.
class MlpModel {
public:
    MlpModel(MlpConfig config, ParamRegistry& registry);

    Eigen::Index input_dim() const { return config_.layer_sizes.front(); }
    Eigen::Index output_dim() const { return config_.layer_sizes.back(); }

    // x: batch x input_dim, y: batch x output_dim. Returns the MSE loss.
    double forward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

    // Analytic gradients for the batch of the preceding forward call.
    void backward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

private:
    MlpConfig config_;
    ParamRegistry* registry_;
    std::vector<std::string> weight_names_;
    std::vector<std::string> bias_names_;

    // Forward cache: activations per layer (activations_[0] is the input).
    std::vector<Eigen::MatrixXd> activations_;
    std::optional<Eigen::MatrixXd> cached_x_;
    std::optional<Eigen::MatrixXd> cached_y_;
};

}  // namespace aggc
