#include <unordered_set>

#include "aggc/scale.hpp"
#include "aggc/types.hpp"

namespace aggc {

void GroupPartition::validate() const {
    if (groups.empty()) throw ConfigError("partition: need at least one group");
    std::unordered_set<std::string> seen_groups;
    std::unordered_set<std::string> seen_members;
    for (const auto& group : groups) {
        if (group.members.empty())
            throw ConfigError("partition: group '" + group.id + "' has no members");
        if (!seen_groups.insert(group.id).second)
            throw ConfigError("partition: duplicate group id '" + group.id + "'");
        for (const auto& member : group.members) {
            if (!seen_members.insert(member).second)
                throw ConfigError("partition: tensor '" + member + "' assigned to more than one group");
        }
    }
}

std::string_view to_string(ClipAction action) {
    switch (action) {
        case ClipAction::kNone: return "none";
        case ClipAction::kClippedHigh: return "clipped_high";
        case ClipAction::kBoostedLow: return "boosted_low";
    }
    return "none";
}

ClipAction clip_action_from_string(std::string_view name) {
    if (name == "none") return ClipAction::kNone;
    if (name == "clipped_high") return ClipAction::kClippedHigh;
    if (name == "boosted_low") return ClipAction::kBoostedLow;
    throw ConfigError("unknown clip action '" + std::string(name) + "'");
}

}  // namespace aggc
