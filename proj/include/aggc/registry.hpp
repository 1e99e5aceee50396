#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "aggc/error.hpp"
#include "aggc/types.hpp"

namespace aggc {

// One named parameter tensor. Values and gradients are stored flattened
// (row-major over `shape`); models map them back to matrices as needed.
struct ParamTensor {
    std::string name;
    std::vector<Eigen::Index> shape;
    Eigen::VectorXd values;
    std::optional<Eigen::VectorXd> grad;

    Eigen::Index size() const { return values.size(); }

    Eigen::Map<Eigen::MatrixXd> values_as_matrix();
    Eigen::Map<Eigen::MatrixXd> grad_as_matrix();
};

// Owns the model's parameters and their gradient buffers, in registration
// order. Names are unique and hierarchical ("layers.0.attn.q_proj.weight").
class ParamRegistry {
public:
    ParamTensor& add(std::string name, std::vector<Eigen::Index> shape);

    bool contains(const std::string& name) const;
    ParamTensor& at(const std::string& name);
    const ParamTensor& at(const std::string& name) const;

    std::vector<ParamTensor>& tensors() { return tensors_; }
    const std::vector<ParamTensor>& tensors() const { return tensors_; }
    std::size_t size() const { return tensors_.size(); }

    // Allocates zeroed gradient buffers for every tensor (idempotent).
    void ensure_grads();
    void zero_grads();
    Eigen::Index param_count() const;

private:
    std::vector<ParamTensor> tensors_;
};

// Ordered name-pattern rules mapping tensors to groups. A pattern containing
// '*' or '?' is matched as a glob over the full name; anything else matches as
// a substring. First matching rule wins; unmatched names fall into
// `default_group`.
struct GroupingRule {
    struct Entry {
        std::string pattern;
        std::string group_id;
    };

    std::vector<Entry> entries;
    std::string default_group = "other";
};

// The module-type taxonomy the toy transformer's parameter names follow.
GroupingRule default_grouping_rules();

bool pattern_matches(const std::string& pattern, const std::string& name);

// Deterministic partition of the registry under the rules: groups ordered by
// first appearance of their id in the rule list (default group last), members
// in registration order.
GroupPartition build_partition(const ParamRegistry& registry, const GroupingRule& rules);

// Gradient views aliasing the registry's buffers, one per partition group.
// Scaling through a view scales the stored gradient.
std::vector<GradientView> collect_group_views(ParamRegistry& registry,
                                              const GroupPartition& partition);

}  // namespace aggc
