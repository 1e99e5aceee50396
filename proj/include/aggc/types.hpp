#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aggc/error.hpp"

namespace aggc {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Non-owning view of one gradient buffer. Mutating through the view mutates
// the underlying storage.
template <typename Scalar>
using TensorViewT = Eigen::Map<VectorX<Scalar>>;

using TensorView = TensorViewT<double>;

// All gradient buffers of one functional group at the current step.
// `tensors[i]` aliases external storage; `tensor_ids[i]` names it for error
// reporting. `cached_norm`, when set, holds the group L2 norm of the current
// buffer contents.
template <typename Scalar>
struct GradientViewT {
    std::string group_id;
    std::vector<TensorViewT<Scalar>> tensors;
    std::vector<std::string> tensor_ids;
    std::optional<double> cached_norm;
};

using GradientView = GradientViewT<double>;

// Assignment of parameter tensors to functional groups. A partition: every
// tensor id appears in exactly one group, every group is nonempty, and group
// order is stable across steps.
struct GroupPartition {
    struct Group {
        std::string id;
        std::vector<std::string> members;
    };

    std::vector<Group> groups;

    Eigen::Index group_count() const { return static_cast<Eigen::Index>(groups.size()); }

    // Throws ConfigError on an empty partition, an empty group, a duplicate
    // group id, or a tensor id appearing in more than one group.
    void validate() const;
};

// Progress through a run of T total steps: p = t / T.
struct StepContext {
    std::int64_t t = 0;
    std::int64_t total_steps = 1;

    StepContext(std::int64_t t, std::int64_t total_steps) : t(t), total_steps(total_steps) {
        if (total_steps <= 0) throw ConfigError("StepContext: total_steps must be positive");
        if (t < 0 || t > total_steps)
            throw ConfigError("StepContext: step index must lie in [0, total_steps]");
    }

    double progress() const { return static_cast<double>(t) / static_cast<double>(total_steps); }
};

}  // namespace aggc
