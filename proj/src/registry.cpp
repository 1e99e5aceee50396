#include "aggc/registry.hpp"

#include <algorithm>
#include <unordered_map>

namespace aggc {

namespace {

Eigen::Index shape_size(const std::vector<Eigen::Index>& shape) {
    Eigen::Index n = 1;
    for (const auto dim : shape) n *= dim;
    return n;
}

Eigen::Map<Eigen::MatrixXd> as_matrix(Eigen::VectorXd& flat,
                                      const std::vector<Eigen::Index>& shape,
                                      const std::string& name) {
    if (shape.size() == 1) return {flat.data(), shape[0], 1};
    if (shape.size() == 2) return {flat.data(), shape[0], shape[1]};
    throw ShapeMismatchError("tensor '" + name + "' is not rank 1 or 2");
}

}  // namespace

Eigen::Map<Eigen::MatrixXd> ParamTensor::values_as_matrix() {
    return as_matrix(values, shape, name);
}

Eigen::Map<Eigen::MatrixXd> ParamTensor::grad_as_matrix() {
    if (!grad) throw MissingGradientError(name);
    return as_matrix(*grad, shape, name);
}

ParamTensor& ParamRegistry::add(std::string name, std::vector<Eigen::Index> shape) {
    if (contains(name)) throw ConfigError("registry: duplicate parameter name '" + name + "'");
    if (shape.empty()) throw ShapeMismatchError("tensor '" + name + "' needs at least one dim");
    for (const auto dim : shape) {
        if (dim <= 0) throw ShapeMismatchError("tensor '" + name + "' has a nonpositive dim");
    }
    ParamTensor tensor;
    tensor.name = std::move(name);
    tensor.values = Eigen::VectorXd::Zero(shape_size(shape));
    tensor.shape = std::move(shape);
    tensors_.push_back(std::move(tensor));
    return tensors_.back();
}

bool ParamRegistry::contains(const std::string& name) const {
    return std::any_of(tensors_.begin(), tensors_.end(),
                       [&](const ParamTensor& t) { return t.name == name; });
}

ParamTensor& ParamRegistry::at(const std::string& name) {
    for (auto& tensor : tensors_) {
        if (tensor.name == name) return tensor;
    }
    throw ConfigError("registry: unknown parameter '" + name + "'");
}

const ParamTensor& ParamRegistry::at(const std::string& name) const {
    for (const auto& tensor : tensors_) {
        if (tensor.name == name) return tensor;
    }
    throw ConfigError("registry: unknown parameter '" + name + "'");
}

void ParamRegistry::ensure_grads() {
    for (auto& tensor : tensors_) {
        if (!tensor.grad) tensor.grad = Eigen::VectorXd::Zero(tensor.size());
    }
}

void ParamRegistry::zero_grads() {
    ensure_grads();
    for (auto& tensor : tensors_) tensor.grad->setZero();
}

Eigen::Index ParamRegistry::param_count() const {
    Eigen::Index n = 0;
    for (const auto& tensor : tensors_) n += tensor.size();
    return n;
}

GroupingRule default_grouping_rules() {
    GroupingRule rules;
    rules.entries = {
        {"q_proj", "query"},   {"k_proj", "key"},       {"v_proj", "value"},
        {"o_proj", "attn_out"}, {"gate_proj", "gate"},  {"up_proj", "up"},
        {"down_proj", "down"}, {"norm", "norm"},        {"embed", "embedding"},
        {"head", "head"},
    };
    rules.default_group = "other";
    return rules;
}

namespace {

bool glob_match(const char* pattern, const char* text) {
    // Iterative fnmatch over '*' and '?', with backtracking to the last star.
    const char* star = nullptr;
    const char* star_text = nullptr;
    while (*text) {
        if (*pattern == '?' || *pattern == *text) {
            ++pattern;
            ++text;
        } else if (*pattern == '*') {
            star = pattern++;
            star_text = text;
        } else if (star) {
            pattern = star + 1;
            text = ++star_text;
        } else {
            return false;
        }
    }
    while (*pattern == '*') ++pattern;
    return *pattern == '\0';
}

}  // namespace

bool pattern_matches(const std::string& pattern, const std::string& name) {
    if (pattern.find_first_of("*?") != std::string::npos)
        return glob_match(pattern.c_str(), name.c_str());
    return name.find(pattern) != std::string::npos;
}

GroupPartition build_partition(const ParamRegistry& registry, const GroupingRule& rules) {
    if (registry.size() == 0) throw EmptyRegistryError("build_partition: registry is empty");

    // Group order: first appearance of the id in the rule list, default last.
    std::vector<std::string> group_order;
    std::unordered_map<std::string, std::size_t> group_index;
    const auto intern = [&](const std::string& id) {
        if (group_index.emplace(id, group_order.size()).second) group_order.push_back(id);
    };
    for (const auto& entry : rules.entries) intern(entry.group_id);
    intern(rules.default_group);

    std::vector<std::vector<std::string>> members(group_order.size());
    for (const auto& tensor : registry.tensors()) {
        std::string assigned = rules.default_group;
        for (const auto& entry : rules.entries) {
            if (pattern_matches(entry.pattern, tensor.name)) {
                assigned = entry.group_id;
                break;
            }
        }
        members[group_index.at(assigned)].push_back(tensor.name);
    }

    GroupPartition partition;
    for (std::size_t j = 0; j < group_order.size(); ++j) {
        if (members[j].empty()) continue;
        partition.groups.push_back({group_order[j], std::move(members[j])});
    }
    partition.validate();
    return partition;
}

std::vector<GradientView> collect_group_views(ParamRegistry& registry,
                                              const GroupPartition& partition) {
    std::vector<GradientView> views;
    views.reserve(partition.groups.size());
    for (const auto& group : partition.groups) {
        GradientView view;
        view.group_id = group.id;
        for (const auto& name : group.members) {
            ParamTensor& tensor = registry.at(name);
            if (!tensor.grad) throw MissingGradientError(name);
            view.tensors.emplace_back(tensor.grad->data(), tensor.grad->size());
            view.tensor_ids.push_back(name);
        }
        views.push_back(std::move(view));
    }
    return views;
}

}  // namespace aggc
