#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "aggc/group_norm.hpp"
#include "aggc/registry.hpp"
#include "aggc/scale.hpp"
#include "support/oracles.hpp"

using namespace aggc;

namespace {

// Two-layer toy transformer name set, in registration order.
ParamRegistry toy_registry() {
    ParamRegistry registry;
    registry.add("embed.weight", {8, 4});
    for (int layer = 0; layer < 2; ++layer) {
        const std::string prefix = "layers." + std::to_string(layer) + ".";
        registry.add(prefix + "attn.q_proj.weight", {4, 4});
        registry.add(prefix + "attn.k_proj.weight", {4, 4});
        registry.add(prefix + "attn.v_proj.weight", {4, 4});
        registry.add(prefix + "attn_norm.weight", {4});
    }
    registry.add("head.weight", {8, 4});
    return registry;
}

}  // namespace

TEST_CASE("build_partition: rule groups plus default catch-all") {
    auto registry = toy_registry();
    GroupingRule rules;
    rules.entries = {{"q_proj", "Q"}, {"k_proj", "K"}};
    rules.default_group = "OTHER";
    const auto partition = build_partition(registry, rules);

    REQUIRE(partition.groups.size() == 3);
    CHECK(partition.groups[0].id == "Q");
    CHECK(partition.groups[0].members ==
          std::vector<std::string>{"layers.0.attn.q_proj.weight", "layers.1.attn.q_proj.weight"});
    CHECK(partition.groups[1].id == "K");
    CHECK(partition.groups[1].members ==
          std::vector<std::string>{"layers.0.attn.k_proj.weight", "layers.1.attn.k_proj.weight"});
    CHECK(partition.groups[2].id == "OTHER");
    CHECK(partition.groups[2].members ==
          std::vector<std::string>{"embed.weight", "layers.0.attn.v_proj.weight",
                                   "layers.0.attn_norm.weight", "layers.1.attn.v_proj.weight",
                                   "layers.1.attn_norm.weight", "head.weight"});
}

TEST_CASE("build_partition: single catch-all rule degenerates to one group") {
    auto registry = toy_registry();
    GroupingRule rules;
    rules.entries = {{"*", "ALL"}};
    const auto partition = build_partition(registry, rules);
    REQUIRE(partition.groups.size() == 1);
    CHECK(partition.groups[0].id == "ALL");
    CHECK(partition.groups[0].members.size() == registry.size());
}

TEST_CASE("build_partition: first matching rule wins") {
    auto registry = toy_registry();
    GroupingRule forward;
    forward.entries = {{"attn", "ATTN"}, {"q_proj", "Q"}};
    const auto a = build_partition(registry, forward);
    // "attn" matches q_proj names first, so no Q group survives.
    for (const auto& group : a.groups) CHECK(group.id != "Q");

    GroupingRule flipped;
    flipped.entries = {{"q_proj", "Q"}, {"attn", "ATTN"}};
    const auto b = build_partition(registry, flipped);
    CHECK(b.groups[0].id == "Q");
    CHECK(b.groups[0].members.size() == 2);
}

TEST_CASE("build_partition: empty registry is an error") {
    ParamRegistry registry;
    CHECK_THROWS_AS(build_partition(registry, default_grouping_rules()), EmptyRegistryError);
}

TEST_CASE("pattern_matches: substring and glob forms") {
    CHECK(pattern_matches("q_proj", "layers.0.attn.q_proj.weight"));
    CHECK_FALSE(pattern_matches("q_proj", "layers.0.attn.k_proj.weight"));
    CHECK(pattern_matches("layers.*.weight", "layers.0.attn.q_proj.weight"));
    CHECK_FALSE(pattern_matches("layers.*.bias", "layers.0.attn.q_proj.weight"));
    CHECK(pattern_matches("layers.?.attn*", "layers.0.attn.q_proj.weight"));
    CHECK_FALSE(pattern_matches("*.bias", "head.weight"));
}

TEST_CASE("build_partition: partition property over random rule sets") {
    auto registry = toy_registry();
    std::mt19937_64 rng(7);
    const std::vector<std::string> pattern_pool = {"q_proj", "k_proj", "v_proj", "norm",
                                                   "embed",  "head",   "layers.0", "*.weight"};
    for (int trial = 0; trial < 100; ++trial) {
        GroupingRule rules;
        std::uniform_int_distribution<std::size_t> count(0, pattern_pool.size());
        const std::size_t n = count(rng);
        for (std::size_t i = 0; i < n; ++i) {
            std::uniform_int_distribution<std::size_t> pick(0, pattern_pool.size() - 1);
            rules.entries.push_back({pattern_pool[pick(rng)], "G" + std::to_string(i % 4)});
        }
        const auto partition = build_partition(registry, rules);

        std::size_t total = 0;
        std::set<std::string> seen;
        for (const auto& group : partition.groups) {
            CHECK(!group.members.empty());
            for (const auto& member : group.members) {
                CHECK(seen.insert(member).second);
                ++total;
            }
        }
        CHECK(total == registry.size());

        // Deterministic: rebuilding gives the identical layout.
        const auto again = build_partition(registry, rules);
        REQUIRE(again.groups.size() == partition.groups.size());
        for (std::size_t g = 0; g < partition.groups.size(); ++g) {
            CHECK(again.groups[g].id == partition.groups[g].id);
            CHECK(again.groups[g].members == partition.groups[g].members);
        }
    }
}

TEST_CASE("collect_group_views: covers every gradient exactly once") {
    auto registry = toy_registry();
    registry.ensure_grads();
    const auto partition = build_partition(registry, default_grouping_rules());
    auto views = collect_group_views(registry, partition);

    std::size_t total = 0;
    for (const auto& view : views) total += view.tensors.size();
    CHECK(total == registry.size());
}

TEST_CASE("collect_group_views: views alias the stored gradients") {
    auto registry = toy_registry();
    registry.ensure_grads();
    for (auto& tensor : registry.tensors()) tensor.grad->setConstant(2.0);

    const auto partition = build_partition(registry, default_grouping_rules());
    auto views = collect_group_views(registry, partition);

    ClipDecision decision;
    decision.group_id = views[0].group_id;
    decision.scale_factor = 0.5;
    decision.action = ClipAction::kClippedHigh;
    apply_scale(views[0], decision);

    const auto& scaled_name = partition.groups[0].members[0];
    CHECK(registry.at(scaled_name).grad->isApproxToConstant(1.0));
    // A tensor outside the scaled group is untouched.
    const auto& other_name = partition.groups[1].members[0];
    CHECK(registry.at(other_name).grad->isApproxToConstant(2.0));
}

TEST_CASE("collect_group_views: group norms compose to the whole-model norm") {
    auto registry = toy_registry();
    registry.ensure_grads();
    std::mt19937_64 rng(11);
    std::vector<Eigen::VectorXd> all;
    for (auto& tensor : registry.tensors()) {
        *tensor.grad = oracle::random_vector(rng, tensor.size());
        all.push_back(*tensor.grad);
    }
    const auto partition = build_partition(registry, default_grouping_rules());
    auto views = collect_group_views(registry, partition);

    double sum_sq = 0.0;
    for (auto& view : views) {
        const double norm = group_norm(view);
        sum_sq += norm * norm;
    }
    const double whole = oracle::concat_norm(all);
    CHECK(oracle::rel_error(std::sqrt(sum_sq), whole) <= 1e-12);
}

TEST_CASE("collect_group_views: missing gradient is an error") {
    auto registry = toy_registry();
    const auto partition = build_partition(registry, default_grouping_rules());
    CHECK_THROWS_AS(collect_group_views(registry, partition), MissingGradientError);
}

TEST_CASE("registry: duplicate names and bad shapes rejected") {
    ParamRegistry registry;
    registry.add("w", {2, 2});
    CHECK_THROWS_AS(registry.add("w", {2, 2}), ConfigError);
    CHECK_THROWS_AS(registry.add("bad", {0, 2}), ShapeMismatchError);
    CHECK_THROWS_AS(registry.add("empty", {}), ShapeMismatchError);
}

TEST_CASE("default grouping rules cover the toy transformer taxonomy") {
    ParamRegistry registry;
    registry.add("embed.weight", {8, 4});
    registry.add("layers.0.attn_norm.weight", {4});
    registry.add("layers.0.attn_norm.bias", {4});
    registry.add("layers.0.attn.q_proj.weight", {4, 4});
    registry.add("layers.0.attn.k_proj.weight", {4, 4});
    registry.add("layers.0.attn.v_proj.weight", {4, 4});
    registry.add("layers.0.attn.o_proj.weight", {4, 4});
    registry.add("layers.0.ffn_norm.weight", {4});
    registry.add("layers.0.ffn_norm.bias", {4});
    registry.add("layers.0.ffn.gate_proj.weight", {8, 4});
    registry.add("layers.0.ffn.up_proj.weight", {8, 4});
    registry.add("layers.0.ffn.down_proj.weight", {4, 8});
    registry.add("head.weight", {8, 4});

    const auto partition = build_partition(registry, default_grouping_rules());
    std::vector<std::string> ids;
    for (const auto& group : partition.groups) ids.push_back(group.id);
    CHECK(ids == std::vector<std::string>{"query", "key", "value", "attn_out", "gate", "up",
                                          "down", "norm", "embedding", "head"});
    // Norm group swallows both layer-norm tensor pairs.
    CHECK(partition.groups[7].members.size() == 4);
}
